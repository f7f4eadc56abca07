import json

import numpy as np
import pytest
import torch

from mgroute.core import ContractViolation
from mgroute.gen import GenSpec, generate
from mgroute.neural import GMSDH, GMSEB, ModelConfig
from mgroute.neural.checkpoint import load_checkpoint, read_tensors, save_checkpoint, write_tensors
from mgroute.train import solve_prefs


@pytest.mark.parametrize("cls", [GMSEB, GMSDH])
def test_roundtrip_preserves_outputs(tmp_path, cls):
    model = cls(ModelConfig(problem="mgmotsp", d=8, heads=2, layers=2, seed=3))
    with torch.no_grad():
        for p in model.parameters():
            p.add_(0.01 * torch.randn_like(p))
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path, extra={"note": "x"})
    back = load_checkpoint(path)
    assert type(back) is cls and back.cfg == model.cfg
    for (k, p), (k2, q) in zip(model.state_dict().items(), back.state_dict().items()):
        assert k == k2 and torch.equal(p, q)
    insts = generate(GenSpec("fix", 6, x=2, problem="mgmotsp"), 2)
    prefs = np.linspace([1, 0], [0, 1], 5)
    a = [x.value_set() for x in solve_prefs(model, insts, prefs)]
    b = [x.value_set() for x in solve_prefs(back, insts, prefs)]
    assert a == b
    assert json.loads((tmp_path / "m.ckpt.json").read_text())["note"] == "x"


def test_tensor_file_roundtrip_and_corruption(tmp_path):
    t = {"a": torch.arange(6, dtype=torch.float64).view(2, 3), "b.c": torch.tensor(1.5, dtype=torch.float64)}
    p = tmp_path / "t.bin"
    write_tensors(p, t)
    back = read_tensors(p)
    assert set(back) == set(t) and all(torch.equal(back[k], t[k]) for k in t)
    good = p.read_bytes()
    p.write_bytes(good + b"\0")
    with pytest.raises(ContractViolation):
        read_tensors(p)
    p.write_bytes(good[:-5])
    with pytest.raises(ContractViolation):
        read_tensors(p)
    p.write_bytes(b"NOPE" + p.read_bytes()[4:])
    with pytest.raises(ContractViolation):
        read_tensors(p)


def test_manifest_mismatch_detected(tmp_path):
    model = GMSEB(ModelConfig(problem="mgmotsp", d=8, heads=2, layers=1))
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    man = json.loads((tmp_path / "m.ckpt.json").read_text())
    man["config"]["d"] = 16
    (tmp_path / "m.ckpt.json").write_text(json.dumps(man))
    with pytest.raises(ContractViolation):
        load_checkpoint(path)
