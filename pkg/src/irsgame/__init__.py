"""Evolutionary network selection in IRS-assisted THz networks.

Typical use::

    from irsgame.scenario import load_scenario, builtin_scenario_path
    from irsgame.utility import evaluate_strategies, net_values
    from irsgame.dynamics import DynamicsConfig, ReplicatorField, integrate

    s = load_scenario(builtin_scenario_path("table2"))
    field = ReplicatorField(net_values(evaluate_strategies(s)), s.population, 0.135)
    traj = integrate(DynamicsConfig(), field)
"""
__version__ = "0.1.0"
