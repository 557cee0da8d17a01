"""
Checkpoint tracking system: a CSV index of trained model files, used to find
pretrained checkpoints automatically (e.g. `finetune --checkpoint AUTOMATIC`).
"""
import glob
import hashlib
import json
import os

import numpy as np
import pandas as pd
import astropy.time as time

import outbreakpred
import outbreakpred.nn as nn

column_dtypes = {
    "Filepath": str,
    "Type": str,
    "T_O": int,
    "Graph Hash": str,
    "Pretrain Hashes": str,
    "FORMATV": int,
    "Param Hash": str,
    "Date Created": float,
}

column_names = list(column_dtypes.keys())


def param_hash(params):
    """
    Content hash of a checkpoint's parameter arrays (names, shapes and values)

    Args:
        params (dict): name -> array

    Returns:
        str: hex digest
    """
    digest = hashlib.sha256()
    for name, array in params.items():
        array = np.ascontiguousarray(array, dtype=np.float64)
        digest.update(name.encode())
        digest.update(str(array.shape).encode())
        digest.update(array.tobytes())
    return digest.hexdigest()


class ModelDB:
    """
    Index of checkpoint files saved to disk. Not parallelism-safe.

    Args:
        filepath (str): CSV file of the index; "" uses the configured modeldb path

    Fields:
        columns (list): index columns
        filepath (str): CSV location
    """
    def __init__(self, filepath=""):
        self.filepath = filepath if filepath else outbreakpred.modeldb_filepath
        self.columns = column_names
        if os.path.exists(self.filepath):
            self.load()
        else:
            self._db = pd.DataFrame(columns=self.columns)
            self.save()

    def __len__(self):
        return len(self._db)

    def load(self):
        self._db = pd.read_csv(self.filepath, dtype=column_dtypes, keep_default_na=False)
        self.columns = list(self._db.columns)

    def save(self):
        self._db.to_csv(self.filepath, index=False)

    def _rows_of(self, filepath):
        return self._db["Filepath"] == os.path.abspath(filepath)

    def describe(self, filepath):
        """
        Index row of a checkpoint file

        Args:
            filepath (str): checkpoint path

        Returns:
            dict: column name -> value
        """
        kind, config, params, provenance = nn.load_checkpoint(filepath)
        return {
            "Filepath": os.path.abspath(filepath),
            # OGWN checkpoints are told apart by how they were made
            "Type": provenance.get("kind", kind) if kind == "ogwn" else kind,
            "T_O": int(provenance.get("t_o", -1)),
            "Graph Hash": provenance.get("finetune_graph_hash", provenance.get("graph_hash", "")),
            "Pretrain Hashes": json.dumps(provenance.get("graph_hashes", [])),
            "FORMATV": outbreakpred.format_version,
            "Param Hash": param_hash(params),
            "Date Created": time.Time.now().mjd,
        }

    def create_entry(self, filepath, to_disk=True):
        """
        Indexes a checkpoint, replacing the row of the same file if there is one

        Args:
            filepath (str): checkpoint to index
            to_disk (bool): reload the index before the change and write it back after
        """
        row = self.describe(filepath)
        if to_disk:
            self.load()

        kept = self._db[~self._rows_of(filepath)]
        new = pd.DataFrame([row], columns=self.columns)
        self._db = new if len(kept) == 0 else pd.concat([kept, new], ignore_index=True)

        if to_disk:
            self.save()

    def remove_entry(self, filepath, to_disk=True):
        """
        Drops the row of a checkpoint

        Args:
            filepath (str): checkpoint whose row is removed
            to_disk (bool): reload the index before the change and write it back after
        """
        if to_disk:
            self.load()
        matches = self._rows_of(filepath)
        if not matches.any():
            raise ValueError("{0} is not in the modeldb at {1}".format(filepath, self.filepath))
        self._db = self._db[~matches].reset_index(drop=True)
        if to_disk:
            self.save()

    def get_model(self, kind, exclude_graph_hashes=(), to_disk=True):
        """
        Most recently indexed checkpoint of a kind that was not trained on any
        of the excluded graphs

        Args:
            kind (str): model kind, e.g. "pretrain", "finetune", "ocnn"
            exclude_graph_hashes (iterable): hashes of graphs the checkpoint must not have seen
            to_disk (bool): reload the index first

        Returns:
            str: checkpoint filepath
        """
        if to_disk:
            self.load()
        options = self._db[self._db["Type"] == kind]
        exclude = set(exclude_graph_hashes)
        if exclude and len(options) > 0:
            unseen = options["Pretrain Hashes"].map(lambda s: exclude.isdisjoint(json.loads(s) if s else []))
            options = options[unseen & ~options["Graph Hash"].isin(exclude)]
        if len(options) == 0:
            raise ValueError("No valid {0} checkpoint in modeldb located at {1}".format(kind, self.filepath))
        return options.sort_values("Date Created", kind="stable").iloc[-1]["Filepath"]

    def scan_dir_for_new_entries(self, filedir, look_in_subfolders=True, to_disk=True):
        """
        Indexes every checkpoint found under a folder. FITS files that are not
        checkpoints (embedding caches) are skipped.

        Args:
            filedir (str): folder to scan
            look_in_subfolders (bool): descend into subfolders
            to_disk (bool): reload the index before the change and write it back after
        """
        pattern = os.path.join(filedir, "**", "*.fits") if look_in_subfolders else os.path.join(filedir, "*.fits")
        for filepath in sorted(glob.glob(pattern, recursive=look_in_subfolders)):
            try:
                nn.load_checkpoint(filepath)
            except (nn.CheckpointError, KeyError):
                continue
            self.create_entry(filepath, to_disk=to_disk)
