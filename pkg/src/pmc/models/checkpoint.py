"""Versioned ``.npz`` checkpoints for branch ensembles and generators.

Arrays are stored under ``<part>/<net>/W<l>`` and ``<part>/<net>/b<l>``; a
JSON document under ``__meta__`` records the format version, layer sizes,
optimizer scalars, random-stream state and epoch counter. Files are written
atomically.
"""
import json
import logging
from typing import Dict

import numpy as np

from pmc.errors import CheckpointError
from pmc.models.branches import BranchEnsemble, ModalityBranch
from pmc.models.mmg import MmgModel
from pmc.nncore import DenseNet, OptimState
from pmc.utils import PathLike, atomic_path

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
META_KEY = "__meta__"


def _put_net(arrays: Dict[str, np.ndarray], prefix: str, net: DenseNet):
    for l, (W, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"{prefix}/W{l}"] = W
        arrays[f"{prefix}/b{l}"] = b


def _get_net(archive, prefix: str, layer_sizes) -> DenseNet:
    try:
        weights = [np.array(archive[f"{prefix}/W{l}"]) for l in range(len(layer_sizes) - 1)]
        biases = [np.array(archive[f"{prefix}/b{l}"]) for l in range(len(layer_sizes) - 1)]
    except KeyError as err:
        raise CheckpointError(f"checkpoint lacks array {err}") from err
    return DenseNet(tuple(layer_sizes), weights, biases)


def _write(path: PathLike, arrays: Dict[str, np.ndarray], meta: dict):
    arrays[META_KEY] = np.array(json.dumps(meta, sort_keys=True))
    with atomic_path(path) as tmp_path:
        with open(tmp_path, "wb") as out_IO:
            np.savez(out_IO, **arrays)
    logger.debug("wrote checkpoint %s", path)


def _read(path: PathLike, kind: str):
    try:
        archive = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as err:
        raise CheckpointError(f"cannot read checkpoint {path}: {err}") from err
    if META_KEY not in archive.files:
        raise CheckpointError(f"{path} is not a pmc checkpoint")
    meta = json.loads(str(archive[META_KEY]))
    if meta.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {meta.get('version')} (expected {FORMAT_VERSION})")
    if meta.get("kind") != kind:
        raise CheckpointError(f"{path} holds a '{meta.get('kind')}' checkpoint, expected '{kind}'")
    return archive, meta


def _optim_meta(optim: OptimState) -> dict:
    return {"base_lr": optim.base_lr, "momentum": optim.momentum, "weight_decay": optim.weight_decay,
            "progress": optim.progress, "lr_mults": list(optim.lr_mults), "inv_schedule": optim.inv_schedule,
            "gamma": optim.gamma, "power": optim.power}


def save_ensemble(ensemble: BranchEnsemble, path: PathLike) -> PathLike:
    arrays: Dict[str, np.ndarray] = {}
    branches = {}
    for m, branch in ensemble.branches.items():
        for net_name in ("feature", "classifier", "domain"):
            _put_net(arrays, f"{m}/{net_name}", getattr(branch, net_name))
        for i, v in enumerate(branch.optim.velocities):
            arrays[f"{m}/velocity/{i}"] = v
        branches[m] = {
            "feature": list(branch.feature.layer_sizes),
            "classifier": list(branch.classifier.layer_sizes),
            "domain": list(branch.domain.layer_sizes),
            "optim": _optim_meta(branch.optim),
            "rng": branch.rng.bit_generator.state,
        }
    meta = {"version": FORMAT_VERSION, "kind": "ensemble", "modalities": list(ensemble.modalities),
            "trade_off": ensemble.trade_off, "adaptation_ramp": ensemble.adaptation_ramp,
            "gamma": ensemble.gamma, "epochs_done": ensemble.epochs_done, "branches": branches}
    _write(path, arrays, meta)
    return path


def load_ensemble(path: PathLike) -> BranchEnsemble:
    archive, meta = _read(path, "ensemble")
    with archive:
        branches = {}
        for m in meta["modalities"]:
            info = meta["branches"][m]
            feature = _get_net(archive, f"{m}/feature", info["feature"])
            classifier = _get_net(archive, f"{m}/classifier", info["classifier"])
            domain = _get_net(archive, f"{m}/domain", info["domain"])
            n_params = len(feature.params) + len(classifier.params) + len(domain.params)
            try:
                velocities = [np.array(archive[f"{m}/velocity/{i}"]) for i in range(n_params)]
            except KeyError as err:
                raise CheckpointError(f"checkpoint lacks optimizer buffer {err}") from err
            optim = OptimState(velocities=velocities, **info["optim"])
            rng = np.random.default_rng()
            rng.bit_generator.state = info["rng"]
            branches[m] = ModalityBranch(m, feature, classifier, domain, optim, rng)
    return BranchEnsemble(branches, meta["trade_off"], meta["adaptation_ramp"], meta["gamma"], meta["epochs_done"])


def save_generator(model: MmgModel, path: PathLike) -> PathLike:
    arrays: Dict[str, np.ndarray] = {}
    for net_name in ("encoder", "decoder", "gen_domain"):
        _put_net(arrays, f"mmg/{net_name}", getattr(model, net_name))
    meta = {"version": FORMAT_VERSION, "kind": "generator", "available": model.available, "missing": model.missing,
            "n_classes": model.n_classes, "lambda_gen": model.lambda_gen, "use_conditioning": model.use_conditioning,
            "frozen": model.frozen,
            "layers": {net_name: list(getattr(model, net_name).layer_sizes)
                       for net_name in ("encoder", "decoder", "gen_domain")}}
    _write(path, arrays, meta)
    return path


def load_generator(path: PathLike) -> MmgModel:
    archive, meta = _read(path, "generator")
    with archive:
        nets = {name: _get_net(archive, f"mmg/{name}", sizes) for name, sizes in meta["layers"].items()}
    model = MmgModel(meta["available"], meta["missing"], nets["encoder"], nets["decoder"], nets["gen_domain"],
                     meta["n_classes"], meta["lambda_gen"], meta["use_conditioning"])
    return model.freeze() if meta["frozen"] else model
