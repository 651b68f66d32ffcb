"""Desk-scale active-perception laboratory.

An exactly analyzable simulated world with hidden information, an
egocentric data-alignment pipeline shared by human-analog and robot-analog
recordings, a toy cognition + flow-matching policy, the deployment runtime
(receding horizon, cognitive gate, chassis controller), and a blind
teleoperation service for demonstration collection.
"""

__version__ = "0.1.0"
