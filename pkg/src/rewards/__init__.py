"""Reward shaping, system objective and opponent beliefs."""
