"""Negotiation instances, protocol state machine and episode environment."""
