from .metrics import path_power, power_rotational, power_trace, power_translational
