"""Netcast photonic inference simulator."""
