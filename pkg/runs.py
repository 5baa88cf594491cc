"""Run records: one JSON file per CLI run, plus a sidecar next to the CSV output"""

import json
import logging
import os
import uuid
from datetime import datetime

logger = logging.getLogger(__name__)

RUNS_FOLDER = os.getenv('STEERING_RUNS_FOLDER', 'runs')

# In-memory records with persistent backup
run_records = {}


def new_run_id():
    return str(uuid.uuid4())


def _run_file(run_id, folder):
    return os.path.join(folder or RUNS_FOLDER, f"{run_id}.json")


def start_run(command, config, reproducible=False, folder=None):
    """Create and persist a record with status 'running'"""
    run_id = new_run_id()
    record = {'run_id': run_id, 'command': command, 'status': 'running', 'config': config, 'rows': []}
    if not reproducible:
        record['created_at'] = datetime.now().isoformat()
    run_records[run_id] = record
    save_run_record(run_id, record, folder)
    return run_id


def save_run_record(run_id, record, folder=None):
    """Save a run record to disk"""
    try:
        os.makedirs(folder or RUNS_FOLDER, exist_ok=True)
        with open(_run_file(run_id, folder), 'w', encoding='utf-8') as f:
            json.dump(record, f, default=str, indent=2)
        logger.debug(f"Saved run record for {run_id}")
    except OSError as e:
        logger.error(f"Error saving run record for {run_id}: {e}")


def load_run_record(run_id, folder=None):
    try:
        path = _run_file(run_id, folder)
        if os.path.exists(path):
            with open(path, 'r', encoding='utf-8') as f:
                return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Error loading run record for {run_id}: {e}")
    return None


def load_all_runs(folder=None):
    """Load every persisted run record into memory"""
    folder = folder or RUNS_FOLDER
    if not os.path.isdir(folder):
        return run_records
    for filename in sorted(os.listdir(folder)):
        if filename.endswith('.json'):
            run_id = filename[:-5]
            record = load_run_record(run_id, folder)
            if record:
                run_records[run_id] = record
                logger.debug(f"Recovered run {run_id} with status: {record.get('status', 'unknown')}")
    return run_records


def update_run_record(run_id, updates, folder=None):
    """Update a run record both in memory and on disk"""
    if run_id in run_records:
        run_records[run_id].update(updates)
        save_run_record(run_id, run_records[run_id], folder)
    else:
        logger.warning(f"Attempted to update non-existent run: {run_id}")


def finish_run(run_id, rows, failed, reproducible=False, folder=None):
    updates = {'status': 'failed' if failed else 'completed', 'rows': rows}
    if not reproducible:
        updates['completed_at'] = datetime.now().isoformat()
    update_run_record(run_id, updates, folder)
    return run_records.get(run_id)


def write_sidecar(out_path, record, reproducible=False):
    """Write the diagnostics record as <out>.json; the run id is dropped under --reproducible"""
    sidecar = dict(record)
    if reproducible:
        sidecar.pop('run_id', None)
    path = f"{out_path}.json"
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(sidecar, f, default=str, indent=2, sort_keys=True)
    logger.info(f"Wrote diagnostics sidecar {path}")
    return path
