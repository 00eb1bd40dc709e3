__all__ = ["files"]
