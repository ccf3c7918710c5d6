"""Placeholder, replaced during build."""

def main(*a, **k):
    raise NotImplementedError

