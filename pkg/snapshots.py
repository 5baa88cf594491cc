#!/usr/bin/env python3
"""Solver snapshots: record conic solutions and replay them without calling the solver"""

import json
import logging
import os
import threading

logger = logging.getLogger(__name__)

SNAPSHOT_FILE = os.getenv('STEERING_SNAPSHOT_FILE', 'solver_snapshots.json')
SNAPSHOT_MODE = os.getenv('STEERING_SNAPSHOT_MODE', 'false').lower() == 'true'
SNAPSHOT_CAPTURE = os.getenv('STEERING_SNAPSHOT_CAPTURE', 'false').lower() == 'true'

snapshots = {}
_lock = threading.Lock()


def load_snapshots(path=None):
    """Load recorded solutions from the snapshot file"""
    global snapshots
    path = path or SNAPSHOT_FILE
    if os.path.exists(path):
        try:
            with open(path, 'r', encoding='utf-8') as f:
                snapshots = json.load(f)
            logger.info(f"✅ Loaded {len(snapshots)} solver snapshots from {path}")
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"Error loading snapshots from {path}: {e}")
            snapshots = {}
    else:
        snapshots = {}
        if SNAPSHOT_MODE:
            logger.warning(f"❌ Snapshot file {path} not found")


def get_snapshot(fingerprint):
    """Recorded solution for a program fingerprint, or None"""
    with _lock:
        return snapshots.get(fingerprint)


def add_snapshot(fingerprint, solution_json, path=None):
    """Record a solution and persist the store"""
    with _lock:
        snapshots[fingerprint] = solution_json
        save_snapshots(path)


def save_snapshots(path=None):
    path = path or SNAPSHOT_FILE
    try:
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(snapshots, f, indent=2, default=str)
    except OSError as e:
        logger.error(f"Error saving snapshots to {path}: {e}")


def clear_snapshots(path=None):
    """Drop every recorded solution, in memory and on disk"""
    global snapshots
    path = path or SNAPSHOT_FILE
    with _lock:
        snapshots = {}
        if os.path.exists(path):
            os.remove(path)
            logger.info(f"✅ Removed: {path}")


# Auto-load on import
load_snapshots()

if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    print(f"Snapshot file: {SNAPSHOT_FILE}")
    print(f"Replay mode: {SNAPSHOT_MODE}, capture mode: {SNAPSHOT_CAPTURE}")
    for key, solution in snapshots.items():
        print(f"{key[:12]}  {solution.get('status')}  objective {solution.get('objective_value')}")
