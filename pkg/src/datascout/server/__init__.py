from .registry import DatasetRecord, ExpertBundle, Registry

__all__ = ["DatasetRecord", "ExpertBundle", "Registry"]
