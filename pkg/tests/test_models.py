from dataclasses import replace

import numpy as np
import pytest

from conftest import finite_difference, rel_error, small_spec
from pmc.errors import (BatchError, CheckpointError, ConditioningError, ContractViolationError, DatasetError,
                        InputShapeError, PairingError)
from pmc.models import (BranchArch, BranchEnsemble, MmgConfig, MmgModel, ModalityBranch, OracleGenerator, adv_loss,
                        generate, load_ensemble, load_generator, mmg_gradients, predict, save_ensemble,
                        save_generator, src_loss, train_dann_epoch, train_mmg, train_mmg_on_dataset)
from pmc.models.branches import branch_gradients, domain_accuracy
from pmc.nncore import DenseNet, OptimConfig, forward
from pmc.synthdata import SOURCE, TARGET, drop_modality, generate_benchmark

ARCH = BranchArch(feature_hidden=(6,), feature_dim=5, domain_hidden=(4,))


def make_branch(seed=0, in_dim=4, n_classes=3):
    return ModalityBranch.create("A", in_dim, n_classes, seed, ARCH)


def lift_biases(*nets):
    for net in nets:
        for b in net.biases:
            b += 0.5


def test_predict_is_on_simplex(rng):
    branch = make_branch()
    p = predict(branch, rng.normal(size=(10, 4)) * 50)
    assert (p >= 0).all()
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
    with pytest.raises(InputShapeError):
        predict(branch, np.zeros(5))


def test_zero_classifier_predicts_uniform(rng):
    branch = make_branch()
    branch.classifier = DenseNet.zeros(branch.classifier.layer_sizes)
    np.testing.assert_allclose(predict(branch, rng.normal(size=4)), np.full(3, 1 / 3))


def test_adv_loss_at_zero_logit_is_log_two(rng):
    branch = make_branch()
    branch.domain = DenseNet.zeros(branch.domain.layer_sizes)
    loss, grads_f, _ = adv_loss(branch, rng.normal(size=(6, 4)), [0, 0, 0, 1, 1, 1], factor=0.3)
    assert loss == pytest.approx(np.log(2))
    with pytest.raises(BatchError):
        adv_loss(branch, np.zeros((0, 4)), [], 0.3)


def test_adv_loss_without_trade_off_leaves_features_alone(rng):
    _, grads_f, grads_d = adv_loss(make_branch(), rng.normal(size=(6, 4)), [0, 1, 0, 1, 0, 1], factor=0.0)
    assert all(not g.any() for g in grads_f)
    assert any(g.any() for g in grads_d)


@pytest.mark.parametrize("trial", range(100))
def test_adv_loss_gradients(trial):
    rng = np.random.default_rng(trial)
    branch = make_branch(seed=trial)
    lift_biases(branch.feature, branch.domain)
    x = rng.normal(size=(6, 4))
    d = rng.integers(0, 2, size=6)
    factor = rng.uniform(0.1, 1.0)
    _, grads_f, grads_d = adv_loss(branch, x, d, factor)

    def loss():
        return adv_loss(branch, x, d, factor)[0]

    assert rel_error(grads_d, finite_difference(loss, branch.domain.params)) < 1e-4
    reversed_numeric = [-factor * g for g in finite_difference(loss, branch.feature.params)]
    assert rel_error(grads_f, reversed_numeric) < 1e-4


@pytest.mark.parametrize("trial", range(100))
def test_src_loss_gradients(trial):
    rng = np.random.default_rng(50 + trial)
    branch = make_branch(seed=trial)
    lift_biases(branch.feature, branch.classifier)
    x = rng.normal(size=(5, 4))
    y = rng.integers(0, 3, size=5)
    _, grads_f, grads_c = src_loss(branch, x, y)

    def loss():
        return src_loss(branch, x, y)[0]

    numeric = finite_difference(loss, branch.feature.params + branch.classifier.params)
    assert rel_error(grads_f + grads_c, numeric) < 1e-4


def test_src_loss_contract(rng):
    branch = make_branch()
    branch.classifier = DenseNet.zeros(branch.classifier.layer_sizes)
    loss, _, _ = src_loss(branch, rng.normal(size=(4, 4)), [0, 1, 2, 0], domains=[SOURCE] * 4)
    assert loss == pytest.approx(np.log(3))
    with pytest.raises(ContractViolationError):
        src_loss(branch, rng.normal(size=(2, 4)), [0, 1], domains=[SOURCE, TARGET])


@pytest.mark.parametrize("trial", range(100))
def test_combined_branch_gradients(trial):
    rng = np.random.default_rng(200 + trial)
    branch = make_branch(seed=trial)
    lift_biases(branch.feature, branch.classifier, branch.domain)
    xs, ys, xt = rng.normal(size=(4, 4)), rng.integers(0, 3, size=4), rng.normal(size=(4, 4))
    pseudo = (np.array([0, 2, 2]), np.array([1, 0, 2]), np.array([0.9, 0.5, 0.4]))
    grads, _ = branch_gradients(branch, xs, ys, xt, 0.0, pseudo)

    def losses():
        return branch_gradients(branch, xs, ys, xt, 0.0, pseudo)[1]

    def classification():
        step = losses()
        return step.src + step.tar

    def total():
        step = losses()
        return step.src + step.tar + step.adv

    n_feature = len(branch.feature.params)
    assert rel_error(grads[:n_feature], finite_difference(classification, branch.feature.params)) < 1e-4
    assert rel_error(grads[n_feature:], finite_difference(total, branch.params[n_feature:])) < 1e-4


def test_dann_epoch_requires_source(tiny_dataset):
    ensemble = BranchEnsemble.create(tiny_dataset, seed=0, arch=ARCH)
    empty = replace(tiny_dataset, source=replace(tiny_dataset.source, ids=np.zeros(0, np.int64),
                                                 payloads={m: np.zeros((0, 4)) for m in ("A", "B")},
                                                 labels=np.zeros(0, np.int64)))
    with pytest.raises(DatasetError):
        train_dann_epoch(ensemble, empty, 0, 1)


def test_dann_reaches_high_source_accuracy_without_shift():
    ds = generate_benchmark(small_spec(rotation=0.0, translation=0.0))
    ensemble = BranchEnsemble.create(ds, seed=3, arch=ARCH, optim_config=OptimConfig(base_lr=0.01))
    for e in range(30):
        accuracies = train_dann_epoch(ensemble, ds, e, 30, batch_size=8)
    assert accuracies["A"] >= 0.9


def test_trade_off_zero_ignores_the_domain_classifier(tiny_dataset):
    def run(domain_hidden):
        arch = replace(ARCH, domain_hidden=domain_hidden)
        ensemble = BranchEnsemble.create(tiny_dataset, seed=5, trade_off=0.0, arch=arch)
        for e in range(3):
            train_dann_epoch(ensemble, tiny_dataset, e, 3, batch_size=8)
        return ensemble.branches["A"]

    a, b = run((4,)), run((9, 3))
    for p, q in zip(a.feature.params + a.classifier.params, b.feature.params + b.classifier.params):
        np.testing.assert_array_equal(p, q)


def test_branches_do_not_depend_on_modality_order(tiny_dataset):
    def run(order):
        ensemble = BranchEnsemble.create(tiny_dataset, seed=11, modalities=order, arch=ARCH)
        for e in range(2):
            train_dann_epoch(ensemble, tiny_dataset, e, 2, batch_size=8)
        return ensemble.branches["B"]

    ab, ba = run(("A", "B")), run(("B", "A"))
    for p, q in zip(ab.params, ba.params):
        np.testing.assert_array_equal(p, q)


def test_domain_accuracy_stays_in_range(tiny_dataset):
    ensemble = BranchEnsemble.create(tiny_dataset, seed=1, arch=ARCH)
    branch = ensemble.branches["A"]
    acc = domain_accuracy(branch, tiny_dataset.source.payloads["A"], tiny_dataset.target.payloads["A"])
    assert 0.0 <= acc <= 1.0


# generator

def tiny_generator(seed=0, **kwargs) -> MmgModel:
    return MmgModel.create("A", "B", 4, 3, 3, seed, MmgConfig(latent_dim=5, hidden=(6,), domain_hidden=(4,), **kwargs))


def test_generate_matches_reference_composition(rng):
    model = tiny_generator()
    x, v = rng.normal(size=(3, 4)), np.array([[1.0, 0, 0], [0.2, 0.3, 0.5], [0, 0, 1.0]])
    _, z = forward(model.encoder, x)
    _, expected = forward(model.decoder, np.hstack([z, v]))
    out = generate(model, x, v)
    np.testing.assert_array_equal(out, expected)
    np.testing.assert_array_equal(out, generate(model, x, v))


def test_zero_decoder_generates_zeros(rng):
    model = tiny_generator()
    model.decoder = DenseNet.zeros(model.decoder.layer_sizes)
    np.testing.assert_array_equal(generate(model, rng.normal(size=4), np.array([0.0, 1.0, 0.0])), np.zeros(3))


def test_conditioning_errors(rng):
    model = tiny_generator()
    with pytest.raises(ConditioningError):
        generate(model, rng.normal(size=4), np.array([0.5, 0.5]))
    with pytest.raises(ConditioningError):
        generate(model, rng.normal(size=5), np.array([1.0, 0.0, 0.0]))
    with pytest.raises(ConditioningError):
        generate(model, rng.normal(size=4), np.array([0.9, 0.9, 0.0]))
    with pytest.raises(ConditioningError):
        MmgModel("A", "B", model.encoder, DenseNet.zeros((6, 3)), model.gen_domain, 3)


def test_disabled_conditioning_ignores_category(rng):
    model = tiny_generator(disable_cv=True)
    x = rng.normal(size=(4, 4))
    a = generate(model, x, np.tile([1.0, 0.0, 0.0], (4, 1)))
    b = generate(model, x, np.tile([0.0, 0.0, 1.0], (4, 1)))
    np.testing.assert_array_equal(a, b)
    assert model.decoder.input_dim == 5 + 3


def test_category_only_reaches_last_decoder_inputs(rng):
    model = tiny_generator()
    x = rng.normal(size=4)
    _, z = forward(model.encoder, x)
    for v in (np.array([1.0, 0, 0]), np.array([0, 1.0, 0])):
        acts, _ = forward(model.decoder, np.concatenate([z, v]))
        np.testing.assert_array_equal(acts.inputs[0][0, :5], z)


def test_generator_adversary_off_gives_target_independent_encoder(rng):
    model = tiny_generator(disable_gend=True)
    xs, xm, ys = rng.normal(size=(4, 4)), rng.normal(size=(4, 3)), np.array([0, 1, 2, 0])
    g1, _ = mmg_gradients(model, xs, xm, ys, rng.normal(size=(4, 4)), model.lambda_gen)
    g2, _ = mmg_gradients(model, xs, xm, ys, rng.normal(size=(4, 4)) + 3, model.lambda_gen)
    n_enc = len(model.encoder.params)
    for a, b in zip(g1[:n_enc], g2[:n_enc]):
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("trial", range(100))
def test_generator_gradients(trial):
    rng = np.random.default_rng(300 + trial)
    model = tiny_generator(seed=trial)
    lift_biases(model.encoder, model.decoder, model.gen_domain)
    xs, ys, xt = rng.normal(size=(4, 4)), rng.integers(0, 3, size=4), rng.normal(size=(3, 4))
    xm = rng.normal(size=(4, 3)) + 10.0
    factor = rng.uniform(0.05, 0.5)
    grads, _ = mmg_gradients(model, xs, xm, ys, xt, factor)
    n_enc = len(model.encoder.params)

    def total():
        _, losses = mmg_gradients(model, xs, xm, ys, xt, factor)
        return losses.gen + losses.adv

    def encoder_objective():
        _, losses = mmg_gradients(model, xs, xm, ys, xt, factor)
        return losses.gen - factor * losses.adv

    assert rel_error(grads[n_enc:], finite_difference(total, model.params[n_enc:])) < 1e-4
    assert rel_error(grads[:n_enc], finite_difference(encoder_objective, model.encoder.params)) < 1e-4


def test_train_mmg_pairing_errors(rng):
    with pytest.raises(PairingError):
        train_mmg(rng.normal(size=(5, 4)), rng.normal(size=(4, 3)), np.zeros(5, int), rng.normal(size=(3, 4)), 3)
    xm = rng.normal(size=(5, 3))
    xm[2, 1] = np.nan
    with pytest.raises(PairingError):
        train_mmg(rng.normal(size=(5, 4)), xm, np.zeros(5, int), rng.normal(size=(3, 4)), 3)


def test_trained_generator_is_frozen_and_deterministic(tiny_dataset):
    ds = drop_modality(tiny_dataset, "B")
    config = MmgConfig(latent_dim=4, hidden=(8,), epochs=3, batch_size=8)
    a = train_mmg_on_dataset(ds, seed=2, config=config)
    b = train_mmg_on_dataset(ds, seed=2, config=config)
    assert a.frozen and not a.encoder.weights[0].flags.writeable
    for p, q in zip(a.params, b.params):
        np.testing.assert_array_equal(p, q)


def test_conditioning_sensitivity(tiny_dataset):
    ds = drop_modality(tiny_dataset, "B")
    x = ds.source.payloads["A"][:20]
    v1, v2 = np.tile([1.0, 0, 0], (20, 1)), np.tile([0, 1.0, 0], (20, 1))

    def sensitivity(**flags):
        model = train_mmg_on_dataset(ds, seed=0, config=MmgConfig(latent_dim=4, hidden=(8,), epochs=5, **flags))
        return np.abs(generate(model, x, v1) - generate(model, x, v2)).mean()

    assert sensitivity() > 0
    assert sensitivity(disable_cv=True) == 0.0


def test_oracle_generator_returns_hidden_payload(tiny_dataset):
    ds = drop_modality(tiny_dataset, "B")
    oracle = OracleGenerator.from_dataset(ds)
    np.testing.assert_array_equal(oracle.generate_target(ds), tiny_dataset.target.payloads["B"])


# checkpoints

def test_ensemble_checkpoint_resumes_exactly(tmp_path, tiny_dataset):
    ensemble = BranchEnsemble.create(tiny_dataset, seed=4, arch=ARCH)
    train_dann_epoch(ensemble, tiny_dataset, 0, 3, batch_size=8)
    path = save_ensemble(ensemble, tmp_path / "ensemble.npz")
    restored = load_ensemble(path)
    assert restored.epochs_done == ensemble.epochs_done == 1
    for e in (1, 2):
        train_dann_epoch(ensemble, tiny_dataset, e, 3, batch_size=8)
        train_dann_epoch(restored, tiny_dataset, e, 3, batch_size=8)
    for m in ensemble.modalities:
        for p, q in zip(ensemble.branches[m].params, restored.branches[m].params):
            np.testing.assert_array_equal(p, q)


def test_generator_checkpoint_round_trip(tmp_path, rng):
    model = tiny_generator().freeze()
    restored = load_generator(save_generator(model, tmp_path / "generator.npz"))
    assert restored.frozen and restored.missing == "B"
    x, v = rng.normal(size=(2, 4)), np.tile([0.2, 0.3, 0.5], (2, 1))
    np.testing.assert_array_equal(generate(model, x, v), generate(restored, x, v))


def test_checkpoint_kind_is_checked(tmp_path):
    path = save_generator(tiny_generator(), tmp_path / "generator.npz")
    with pytest.raises(CheckpointError):
        load_ensemble(path)
