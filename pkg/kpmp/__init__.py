from pathlib import Path

from dotenv import load_dotenv

__version__ = "0.1.0"

dotenv_dir = Path.home() / ".kpmp"
dotenv_path = (dotenv_dir / ".env").resolve()

# Load the users .env files into environment variables; explicit variables win.
load_dotenv(Path.cwd() / ".env", override=False)
if dotenv_path.exists():
    load_dotenv(dotenv_path, override=False)

del load_dotenv
