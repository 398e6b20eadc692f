"""Dataset registry, canonical CSV ingestion and checksum-verified fetching."""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
import shutil
import urllib.error
import urllib.request
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import (ChecksumMismatch, InvalidTarget, MissingColumn, NetworkFailure,
                      ParseFailure, SmilesError, UnknownDataset)
from ..smiles import constitution_key, parse_smiles

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetInfo:
    name: str
    task: str
    filename: str | None
    sha256: str | None
    source_url: str
    note: str = ""

    @property
    def available(self):
        return self.filename is not None


# Checksums pin the canonical `smiles,target` files shipped in probmol/data.
REGISTRY = {
    "delaney": DatasetInfo(
        "Delaney", "regression", "delaney.csv",
        "eeea6eaa5683375ac0feaf9013d6d61cc4aaadfa1e5b3af218351dfa7b01be09",
        "https://deepchemdata.s3-us-west-1.amazonaws.com/datasets/delaney-processed.csv",
        "ESOL aqueous log solubility (mol/L)"),
    "freesolv": DatasetInfo(
        "Freesolv", "regression", "freesolv.csv",
        "246099a990a6995a93863c292c743e4b615e9cfad6328f96d8b2bcf1d7aedeb5",
        "https://deepchemdata.s3-us-west-1.amazonaws.com/datasets/SAMPL.csv",
        "experimental hydration free energy (kcal/mol)"),
    "bace": DatasetInfo(
        "BACE", "binary", "bace.csv",
        "4666a966319b599fd04869c3406c9ee772d206fa97049c2494e9d2d93a5e4cb2",
        "https://deepchemdata.s3-us-west-1.amazonaws.com/datasets/bace.csv",
        "BACE-1 inhibitor class"),
    "bbbp": DatasetInfo(
        "BBBP", "binary", "bbbp.csv",
        "301648c05e048b83e7dcfabb8a2b33f3354067aa2ebf2c481af7d6f6d029b21f",
        "https://deepchemdata.s3-us-west-1.amazonaws.com/datasets/BBBP.csv",
        "blood-brain barrier penetration"),
    "biohl": DatasetInfo(
        "BioHL", "regression", None, None,
        "https://github.com/kmansouri/OPERA",
        "OPERA biodegradation half-life; not bundled, supply a canonical CSV via source="),
    "rbiodeg": DatasetInfo(
        "RBioDeg", "binary", None, None,
        "https://github.com/kmansouri/OPERA",
        "OPERA ready biodegradability; not bundled, supply a canonical CSV via source="),
}


def dataset_info(name) -> DatasetInfo:
    try:
        return REGISTRY[name.lower()]
    except KeyError:
        raise UnknownDataset(f"unknown dataset {name!r}; known: {sorted(REGISTRY)}") from None


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def bundled_path(name):
    info = dataset_info(name)
    if not info.available:
        raise UnknownDataset(f"{info.name} is not bundled; {info.note}")
    return resources.files("probmol.data").joinpath(info.filename)


@dataclass(frozen=True)
class Dataset:
    name: str
    task: str
    smiles: tuple
    targets: np.ndarray
    graphs: tuple = field(repr=False, compare=False, default=())
    checksum: str = ""
    n_duplicates: int = 0
    n_dropped: int = 0
    skipped_rows: tuple = ()

    def __len__(self):
        return len(self.smiles)


def _dedup_key(graph):
    return constitution_key(graph), tuple(sorted(Counter(graph.stereo_tokens).items()))


def load_dataset(path, task=None, name=None, strict=True) -> Dataset:
    """Read a canonical ``smiles,target`` CSV.

    Molecules are deduplicated by constitution plus stereo marks (first kept),
    and entries without any bond (lone atoms or ions) are dropped. With
    ``strict=False`` unparseable rows are skipped and counted instead of
    failing the load.
    """
    path = Path(path)
    raw = path.read_bytes()
    text = raw.decode("utf-8-sig")
    reader = csv.DictReader(io.StringIO(text))
    fields = reader.fieldnames or []
    for col in ("smiles", "target"):
        if col not in fields:
            raise MissingColumn(f"{path.name}: missing required column {col!r} (have {fields})")
    if task is None and name is not None:
        task = dataset_info(name).task
    task = task or "regression"
    smiles, values, graphs, bad, msgs = [], [], [], [], []
    for lineno, row in enumerate(reader, start=2):
        s = (row["smiles"] or "").strip()
        t = (row["target"] or "").strip()
        try:
            y = float(t)
        except ValueError:
            raise InvalidTarget(f"{path.name} row {lineno}: target {t!r} is not a number") from None
        if not math.isfinite(y):
            raise InvalidTarget(f"{path.name} row {lineno}: target must be finite")
        if task == "binary" and y not in (0.0, 1.0):
            raise InvalidTarget(f"{path.name} row {lineno}: binary target must be 0 or 1, got {t!r}")
        try:
            g = parse_smiles(s)
        except SmilesError as exc:
            bad.append(lineno)
            msgs.append(f"row {lineno}: {exc}")
            continue
        smiles.append(s)
        values.append(y)
        graphs.append(g)
    if bad and strict:
        raise ParseFailure(bad, msgs)
    if bad:
        log.warning("%s: skipped %d unparseable rows", path.name, len(bad))

    seen = set()
    keep = []
    dropped = dup = 0
    for i, g in enumerate(graphs):
        if g.num_bonds == 0:
            dropped += 1
            continue
        key = _dedup_key(g)
        if key in seen:
            dup += 1
            continue
        seen.add(key)
        keep.append(i)
    if dup or dropped:
        log.info("%s: dropped %d duplicates and %d bond-free entries", path.name, dup, dropped)
    return Dataset(name or path.stem, task, tuple(smiles[i] for i in keep),
                   np.array([values[i] for i in keep], dtype=np.float64),
                   tuple(graphs[i] for i in keep), hashlib.sha256(raw).hexdigest(),
                   dup, dropped, tuple(bad))


def fetch_dataset(name, dest, source=None) -> Path:
    """Place the canonical CSV for ``name`` in directory ``dest``.

    The default source is the copy bundled with the package; ``source`` may be
    an http(s)/file URL or a local path to a canonical CSV. The result must
    match the pinned SHA-256 (when one is registered), otherwise the file is
    removed and ChecksumMismatch is raised. A verified existing file is reused.
    """
    info = dataset_info(name)
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    target = dest / f"{name.lower()}.csv"
    if target.exists() and info.sha256 and sha256_file(target) == info.sha256:
        log.info("%s: cached copy verified", target)
        return target
    tmp = target.with_suffix(".part")
    try:
        if source is None:
            with resources.as_file(bundled_path(name)) as src:
                shutil.copyfile(src, tmp)
        elif "://" in str(source):
            try:
                with urllib.request.urlopen(str(source), timeout=60) as resp, open(tmp, "wb") as fh:
                    shutil.copyfileobj(resp, fh)
            except (urllib.error.URLError, OSError) as exc:
                raise NetworkFailure(f"could not download {source}: {exc}") from exc
        else:
            shutil.copyfile(source, tmp)
        digest = sha256_file(tmp)
        if info.sha256 and digest != info.sha256:
            raise ChecksumMismatch(f"{info.name}: sha256 {digest} does not match pinned {info.sha256}")
        tmp.replace(target)
    finally:
        if tmp.exists():
            tmp.unlink()
    return target


def load_registered(name, cache_dir=None, strict=True) -> Dataset:
    """Load a registry dataset, from ``cache_dir`` if given, else from the bundled copy."""
    info = dataset_info(name)
    if cache_dir is not None:
        path = fetch_dataset(name, cache_dir)
        return load_dataset(path, info.task, info.name, strict)
    with resources.as_file(bundled_path(name)) as p:
        return load_dataset(p, info.task, info.name, strict)
