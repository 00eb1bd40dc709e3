__all__ = ["funcfile", "graphfile", "spacefile"]
