from datetime import datetime
from pathlib import Path
from typing import Iterable, Optional, Union

import pandas as pd
from peewee import (
    AutoField,
    BooleanField,
    DatabaseProxy,
    DateTimeField,
    FloatField,
    IntegerField,
    Model,
    SqliteDatabase,
    TextField,
)

from ..constants import CSV_COLUMNS, KPMP_DB_PATH
from .benchmark import TrialRecord

database_proxy = DatabaseProxy()


class BaseModel(Model):
    class Meta:
        database = database_proxy


class Trial(BaseModel):
    id = AutoField()
    session = TextField()
    created = DateTimeField(default=datetime.now)
    scenario = TextField()
    planner = TextField()
    mode = TextField()
    seed = IntegerField()
    success = BooleanField()
    planning_time_s = FloatField()
    power_w = FloatField(null=True)
    path_duration_s = FloatField()
    contacts = IntegerField()


def init_db(path: Union[str, Path, None] = None) -> None:
    """Bind the proxy to a SQLite file (``KPMP_DB_PATH`` by default) and create the tables."""
    path = Path(path) if path is not None else KPMP_DB_PATH
    if str(path) != ":memory:":
        path.parent.mkdir(parents=True, exist_ok=True)
    database_proxy.initialize(SqliteDatabase(str(path)))
    database_proxy.create_tables([Trial])


def store_records(records: Iterable[TrialRecord], session: Optional[str] = None) -> int:
    session = session or datetime.now().isoformat(timespec="seconds")
    rows = [{**{key: record[key] for key in CSV_COLUMNS}, "session": session} for record in records]
    with database_proxy.atomic():
        for row in rows:
            Trial.insert(row).execute()
    return len(rows)


def load_records(scenario: Optional[str] = None) -> pd.DataFrame:
    query = Trial.select().order_by(Trial.id)
    if scenario is not None:
        query = query.where(Trial.scenario == scenario)
    rows = list(query.dicts())
    return pd.DataFrame(rows, columns=["session", "created"] + CSV_COLUMNS)
