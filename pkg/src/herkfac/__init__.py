"""Hindsight experience replay with TD3/DDPG agents and K-FAC natural-gradient training."""

__version__ = "0.1.0"
