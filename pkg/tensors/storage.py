"""
Checkpoint container for MPS/MPO data.

A container is a numpy ``.npz`` archive. The entry ``header`` holds a JSON
document::

    {"format": "ensemble-mps", "version": 1, "entries": {
        "<name>": {"kind": "mps" | "mpo", "phys_dim": 4,
                   "canonical_center": 0 | null, "num_sites": N}},
     "metadata": {...}}

Site tensors of entry ``<name>`` are stored as ``<name>/<index>`` arrays of dtype
``complex128`` whose shapes are the site shapes.
"""

import json
import logging
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from ensemble_service import settings
from ensemble_service.exceptions import CheckpointFormatError
from tensors.mpo import MpoOperator
from tensors.mps import MpsVector

logger = logging.getLogger(__name__)

Network = Union[MpsVector, MpoOperator]


def pack_networks(networks: Dict[str, Network], metadata=None) -> Dict[str, np.ndarray]:
    entries = {}
    arrays = {}
    for name, network in networks.items():
        if "/" in name:
            raise ValueError(f"Entry name {name!r} must not contain '/'")
        entries[name] = {
            "kind": "mps" if isinstance(network, MpsVector) else "mpo",
            "phys_dim": network.phys_dim,
            "canonical_center": getattr(network, "canonical_center", None),
            "num_sites": len(network),
        }
        for index, site in enumerate(network.sites):
            arrays[f"{name}/{index}"] = np.ascontiguousarray(site, dtype=np.complex128)

    header = {
        "format": settings.CHECKPOINT_FORMAT,
        "version": settings.CHECKPOINT_FORMAT_VERSION,
        "entries": entries,
        "metadata": metadata or {},
    }
    arrays["header"] = np.array(json.dumps(header, sort_keys=True))
    return arrays


def unpack_networks(arrays) -> Tuple[Dict[str, Network], dict]:
    if "header" not in arrays:
        raise CheckpointFormatError("Container has no header entry")
    header = json.loads(str(arrays["header"]))
    if header.get("format") != settings.CHECKPOINT_FORMAT:
        raise CheckpointFormatError(f"Unknown container format {header.get('format')!r}")
    if header.get("version") != settings.CHECKPOINT_FORMAT_VERSION:
        raise CheckpointFormatError(f"Unsupported container version {header.get('version')!r}")

    networks = {}
    for name, entry in header["entries"].items():
        try:
            sites = tuple(arrays[f"{name}/{index}"] for index in range(entry["num_sites"]))
        except KeyError as exc:
            raise CheckpointFormatError(f"Missing site tensor for entry {name!r}") from exc
        if entry["kind"] == "mps":
            networks[name] = MpsVector(
                sites=sites,
                phys_dim=entry["phys_dim"],
                canonical_center=entry["canonical_center"],
            )
        elif entry["kind"] == "mpo":
            networks[name] = MpoOperator(sites=sites, phys_dim=entry["phys_dim"])
        else:
            raise CheckpointFormatError(f"Unknown entry kind {entry['kind']!r}")
    return networks, header["metadata"]


def save_networks(path, networks: Dict[str, Network], metadata=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as stream:
        np.savez(stream, **pack_networks(networks, metadata))
    logger.debug(f"Saved {len(networks)} networks to {path}")
    return path


def load_networks(path) -> Tuple[Dict[str, Network], dict]:
    with np.load(Path(path), allow_pickle=False) as archive:
        return unpack_networks({key: archive[key] for key in archive.files})


def save_mps(path, vector: MpsVector, metadata=None) -> Path:
    return save_networks(path, {"vector": vector}, metadata)


def load_mps(path) -> MpsVector:
    networks, _ = load_networks(path)
    vector = networks.get("vector")
    if not isinstance(vector, MpsVector):
        raise CheckpointFormatError(f"{path} does not hold an MPS vector")
    return vector


def save_mpo(path, operator: MpoOperator, metadata=None) -> Path:
    return save_networks(path, {"operator": operator}, metadata)


def load_mpo(path) -> MpoOperator:
    networks, _ = load_networks(path)
    operator = networks.get("operator")
    if not isinstance(operator, MpoOperator):
        raise CheckpointFormatError(f"{path} does not hold an MPO")
    return operator
