"""Stapling cache: persisted, deduplicated, scheduled-refresh OCSP responses."""

from .service import MaintenanceReport, StapleCache
from .store import CacheEntry, CacheStore, recover_store

__all__ = ["CacheEntry", "CacheStore", "MaintenanceReport", "StapleCache", "recover_store"]
