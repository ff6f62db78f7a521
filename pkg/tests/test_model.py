"""Tagger assembly and training: configuration validation, parameter
counts per variant, deterministic builds, the SGD loop, prediction, and
the model file codec including its failure taxonomy."""

import hashlib
import json

import numpy as np
import pytest

from seqtag.data import (
    TaggedSentence,
    Vocabulary,
    build_vocab,
    generate_synthetic_corpus,
)
from seqtag.errors import (
    ConfigError,
    DataError,
    ModelChecksumError,
    ModelFormatError,
    ModelTruncatedError,
    ModelVersionError,
)
from seqtag.model import (
    GRAD_CLIP_NORM,
    MODEL_FORMAT_VERSION,
    MODEL_MAGIC,
    VARIANTS,
    ModelConfig,
    TaggerModel,
    _clip_gradients,
    build_model,
    load_model,
    save_model,
    train,
)


def tiny_vocab(num_extra_tokens=6, num_tags=3):
    tokens = ["<pad>", "<unk>"] + [f"tok{i}" for i in range(num_extra_tokens)]
    tags = [f"T{i}" for i in range(num_tags)]
    return Vocabulary(tokens, tags)


def tiny_config(variant, **overrides):
    base = dict(
        variant=variant,
        embedding_dim=5,
        hidden_dim=4,
        learning_rate=0.05,
        epochs=2,
        seed=7,
        kernel_width=3,
        conv_channels=6,
    )
    base.update(overrides)
    return ModelConfig(**base)


def tiny_corpus(seed, n, vocab_size=20, n_tags=3):
    return generate_synthetic_corpus(seed, n, vocab_size=vocab_size, n_tags=n_tags)


class TestModelConfig:
    def test_defaults(self):
        cfg = ModelConfig()
        assert cfg.variant == "bigru_cnn_crf"
        assert cfg.embedding_dim == 128
        assert cfg.hidden_dim == 128
        assert cfg.learning_rate == 0.005
        assert cfg.epochs == 20
        assert cfg.kernel_width == 3
        assert cfg.conv_channels == 128

    def test_defaults_validate(self):
        ModelConfig().validate()

    def test_unknown_variant(self):
        with pytest.raises(ConfigError, match="unknown variant"):
            ModelConfig(variant="transformer").validate()

    def test_unknown_variant_message_lists_options(self):
        with pytest.raises(ConfigError, match="bigru_cnn_crf"):
            ModelConfig(variant="nope").validate()

    @pytest.mark.parametrize("field,value", [
        ("embedding_dim", 0),
        ("hidden_dim", -1),
        ("conv_channels", 0),
        ("epochs", 0),
        ("learning_rate", -0.1),
        ("learning_rate", float("nan")),
        ("kernel_width", 2),
        ("kernel_width", 0),
        ("kernel_width", -3),
    ])
    def test_rejects_bad_field(self, field, value):
        cfg = ModelConfig(**{field: value})
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_zero_learning_rate_allowed(self):
        # lr 0 is a legitimate frozen-parameters probe
        ModelConfig(learning_rate=0.0).validate()

    def test_build_rejects_invalid_config(self):
        with pytest.raises(ConfigError):
            build_model(ModelConfig(variant="bogus"), tiny_vocab())


def expected_param_count(cfg, vocab):
    """Closed-form size of each variant, derived from the layer shapes."""
    d, h, c = cfg.embedding_dim, cfg.hidden_dim, cfg.conv_channels
    v, k = vocab.num_tokens, vocab.num_tags
    gates = {"rnn_crf": 1, "gru_crf": 3, "lstm_crf": 4}
    total = v * d                       # embedding table
    feat = d
    if cfg.variant in gates:
        total += gates[cfg.variant] * ((d + h) * h + h)
        feat = h
    elif cfg.variant in ("bigru_crf", "bigru_cnn_crf"):
        total += 2 * 3 * ((d + h) * h + h)
        feat = 2 * h
    if cfg.variant in ("cnn_crf", "bigru_cnn_crf"):
        total += cfg.kernel_width * feat * c + c
        feat = c
    total += feat * k + k               # dense projection
    total += (k + 2) * (k + 2)          # crf transitions
    return total


class TestBuild:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_parameter_count_matches_closed_form(self, variant):
        vocab = tiny_vocab()
        cfg = tiny_config(variant)
        model = build_model(cfg, vocab)
        assert model.parameter_count() == expected_param_count(cfg, vocab)

    def test_crf_only_has_no_encoder(self):
        model = build_model(tiny_config("crf_only"), tiny_vocab())
        assert model.recurrent is None and model.conv is None

    def test_cnn_variant_has_conv_no_recurrent(self):
        model = build_model(tiny_config("cnn_crf"), tiny_vocab())
        assert model.recurrent is None and model.conv is not None

    @pytest.mark.parametrize("variant", ["rnn_crf", "gru_crf", "lstm_crf"])
    def test_unidirectional_variants(self, variant):
        model = build_model(tiny_config(variant), tiny_vocab())
        assert model.recurrent is not None and model.conv is None

    def test_bigru_parameter_names_have_both_directions(self):
        model = build_model(tiny_config("bigru_crf"), tiny_vocab())
        names = set(model.parameters())
        assert "recurrent.fwd.w_z" in names and "recurrent.bwd.w_z" in names

    def test_full_variant_has_all_stages(self):
        model = build_model(tiny_config("bigru_cnn_crf"), tiny_vocab())
        assert model.recurrent is not None and model.conv is not None

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_same_seed_builds_identically(self, variant):
        vocab = tiny_vocab()
        a = build_model(tiny_config(variant), vocab)
        b = build_model(tiny_config(variant), vocab)
        for name, arr in a.parameters().items():
            np.testing.assert_array_equal(arr, b.parameters()[name], err_msg=name)

    def test_different_seeds_differ(self):
        vocab = tiny_vocab()
        a = build_model(tiny_config("gru_crf", seed=1), vocab)
        b = build_model(tiny_config("gru_crf", seed=2), vocab)
        assert any(
            not np.array_equal(arr, b.parameters()[name])
            for name, arr in a.parameters().items()
        )

    def test_gradients_mirror_parameters(self):
        model = build_model(tiny_config("bigru_cnn_crf"), tiny_vocab())
        params, grads = model.parameters(), model.gradients()
        assert set(params) == set(grads)
        for name in params:
            assert params[name].shape == grads[name].shape


class TestEmissions:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_shape_is_length_by_tags(self, variant):
        vocab = tiny_vocab(num_tags=4)
        model = build_model(tiny_config(variant), vocab)
        rng = np.random.default_rng(3)
        for _ in range(5):
            t_len = int(rng.integers(1, 9))
            ids = rng.integers(0, vocab.num_tokens, size=t_len).tolist()
            em = model.emissions(ids)
            assert em.shape == (t_len, 4)
            assert np.isfinite(em).all()

    def test_loss_is_finite_positive(self):
        vocab = tiny_vocab()
        model = build_model(tiny_config("bigru_cnn_crf"), vocab)
        loss = model.loss([2, 3, 4], [0, 1, 2])
        assert np.isfinite(loss) and loss > 0.0


class TestClipGradients:
    def test_large_gradients_scaled_to_max_norm(self):
        g = [np.full((3, 3), 10.0), np.full(4, -10.0)]
        pre = _clip_gradients(g, GRAD_CLIP_NORM)
        post = np.sqrt(sum(float(a.ravel() @ a.ravel()) for a in g))
        assert pre > GRAD_CLIP_NORM
        assert post == pytest.approx(GRAD_CLIP_NORM, rel=1e-12)

    def test_small_gradients_untouched(self):
        g = [np.array([0.3, -0.4])]
        pre = _clip_gradients(g, GRAD_CLIP_NORM)
        assert pre == pytest.approx(0.5)
        np.testing.assert_array_equal(g[0], [0.3, -0.4])

    def test_direction_preserved(self):
        rng = np.random.default_rng(11)
        g = [rng.normal(size=6) * 100.0]
        before = g[0].copy()
        _clip_gradients(g, GRAD_CLIP_NORM)
        cos = float(g[0] @ before) / (
            np.linalg.norm(g[0]) * np.linalg.norm(before)
        )
        assert cos == pytest.approx(1.0)


def split_corpus(corpus, n_train):
    return corpus[:n_train], corpus[n_train:]


class TestTrain:
    def test_zero_learning_rate_leaves_parameters_unchanged(self):
        corpus = tiny_corpus(0, 12)
        tr, va = split_corpus(corpus, 9)
        vocab = build_vocab(tr, tag_source=corpus)
        model = build_model(tiny_config("gru_crf", learning_rate=0.0, epochs=3), vocab)
        before = {k: v.copy() for k, v in model.parameters().items()}
        report = train(model, tr, va)
        for name, arr in model.parameters().items():
            np.testing.assert_array_equal(arr, before[name], err_msg=name)
        # with frozen parameters every epoch sees the same mean loss
        assert max(report.epoch_losses) - min(report.epoch_losses) < 1e-9

    def test_loss_decreases_on_learnable_data(self):
        corpus = tiny_corpus(1, 30)
        tr, va = split_corpus(corpus, 24)
        vocab = build_vocab(tr, tag_source=corpus)
        model = build_model(tiny_config("gru_crf", epochs=5, learning_rate=0.1), vocab)
        report = train(model, tr, va)
        assert report.epoch_losses[-1] < report.epoch_losses[0]

    def test_report_lengths_and_best_epoch(self):
        corpus = tiny_corpus(2, 12)
        tr, va = split_corpus(corpus, 9)
        vocab = build_vocab(tr, tag_source=corpus)
        model = build_model(tiny_config("crf_only", epochs=4), vocab)
        report = train(model, tr, va)
        assert len(report.epoch_losses) == 4
        assert len(report.val_f1) == 4
        assert len(report.val_accuracy) == 4
        assert 1 <= report.best_epoch <= 4
        assert report.best_val_f1 == max(report.val_f1)

    def test_best_epoch_parameters_restored(self):
        # force distinct per-epoch snapshots, then check the kept weights
        # reproduce the best epoch's validation score exactly
        corpus = tiny_corpus(3, 20)
        tr, va = split_corpus(corpus, 15)
        vocab = build_vocab(tr, tag_source=corpus)
        model = build_model(tiny_config("rnn_crf", epochs=4, learning_rate=0.2), vocab)
        snapshots = []
        report = train(
            model, tr, va,
            on_epoch=lambda *a: snapshots.append(
                {k: v.copy() for k, v in model.parameters().items()}
            ),
        )
        best = snapshots[report.best_epoch - 1]
        for name, arr in model.parameters().items():
            np.testing.assert_array_equal(arr, best[name], err_msg=name)

    def test_identical_seeds_train_bit_identically(self):
        corpus = tiny_corpus(4, 14)
        tr, va = split_corpus(corpus, 10)
        vocab = build_vocab(tr, tag_source=corpus)
        runs = []
        for _ in range(2):
            model = build_model(tiny_config("bigru_crf", epochs=2), vocab)
            report = train(model, tr, va)
            runs.append((model.parameters(), report.epoch_losses))
        assert runs[0][1] == runs[1][1]
        for name, arr in runs[0][0].items():
            np.testing.assert_array_equal(arr, runs[1][0][name], err_msg=name)

    def test_unseen_tag_fails_fast(self):
        corpus = tiny_corpus(5, 12)
        tr, va = split_corpus(corpus, 9)
        vocab = build_vocab(tr, tag_source=tr)
        bad = tr + [TaggedSentence(["tok"], ["NEVER_SEEN"])]
        model = build_model(tiny_config("crf_only", epochs=1), vocab)
        with pytest.raises(DataError, match="NEVER_SEEN"):
            train(model, bad, va)

    def test_empty_sets_rejected(self):
        corpus = tiny_corpus(6, 6)
        vocab = build_vocab(corpus)
        model = build_model(tiny_config("crf_only"), vocab)
        with pytest.raises(ValueError):
            train(model, [], corpus)
        with pytest.raises(ValueError):
            train(model, corpus, [])

    def test_on_epoch_callback_sees_every_epoch(self):
        corpus = tiny_corpus(7, 10)
        tr, va = split_corpus(corpus, 7)
        vocab = build_vocab(tr, tag_source=corpus)
        model = build_model(tiny_config("crf_only", epochs=3), vocab)
        seen = []
        train(model, tr, va, on_epoch=lambda e, loss, f1, acc: seen.append(e))
        assert seen == [1, 2, 3]


class TestPredict:
    def setup_method(self):
        self.vocab = tiny_vocab(num_extra_tokens=10, num_tags=4)
        self.model = build_model(tiny_config("bigru_cnn_crf"), self.vocab)

    def test_one_tag_per_token(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            t_len = int(rng.integers(1, 12))
            tokens = [f"tok{int(rng.integers(0, 10))}" for _ in range(t_len)]
            tags = self.model.predict(tokens)
            assert len(tags) == t_len

    def test_known_tags_only(self):
        tags = self.model.predict(["tok0", "mystery", "tok3"])
        assert set(tags) <= set(self.vocab.id_to_tag)

    def test_deterministic(self):
        tokens = ["tok1", "tok2", "tok1"]
        assert self.model.predict(tokens) == self.model.predict(tokens)

    def test_unknown_tokens_fall_back_to_unk(self):
        # must not raise: unseen surface forms map to the UNK row
        assert len(self.model.predict(["zzz", "qqq"])) == 2

    def test_empty_sentence_rejected(self):
        with pytest.raises(ValueError):
            self.model.predict([])


class TestSaveLoad:
    def roundtrip(self, tmp_path, variant="gru_crf"):
        vocab = tiny_vocab()
        model = build_model(tiny_config(variant), vocab)
        path = save_model(model, tmp_path / "m.seqtag")
        return model, load_model(path), path

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_roundtrip_bit_identical(self, tmp_path, variant):
        vocab = tiny_vocab()
        model = build_model(tiny_config(variant), vocab)
        path = save_model(model, tmp_path / "m.seqtag")
        loaded = load_model(path)
        assert loaded.config == model.config
        assert loaded.vocab.id_to_token == vocab.id_to_token
        assert loaded.vocab.id_to_tag == vocab.id_to_tag
        for name, arr in model.parameters().items():
            np.testing.assert_array_equal(arr, loaded.parameters()[name], err_msg=name)

    def test_roundtrip_preserves_predictions(self, tmp_path):
        model, loaded, _ = self.roundtrip(tmp_path)
        rng = np.random.default_rng(21)
        for _ in range(10):
            tokens = [f"tok{int(rng.integers(0, 6))}" for _ in range(int(rng.integers(1, 9)))]
            assert model.predict(tokens) == loaded.predict(tokens)

    def test_saved_twice_identical_bytes(self, tmp_path):
        model = build_model(tiny_config("cnn_crf"), tiny_vocab())
        a = save_model(model, tmp_path / "a.seqtag").read_bytes()
        b = save_model(model, tmp_path / "b.seqtag").read_bytes()
        assert a == b

    def test_file_starts_with_magic_and_version(self, tmp_path):
        _, _, path = self.roundtrip(tmp_path)
        blob = path.read_bytes()
        assert blob.startswith(MODEL_MAGIC)
        assert blob[len(MODEL_MAGIC)] == MODEL_FORMAT_VERSION

    def test_checksum_is_sha256_of_body(self, tmp_path):
        _, _, path = self.roundtrip(tmp_path)
        blob = path.read_bytes()
        assert blob[-32:] == hashlib.sha256(blob[:-32]).digest()


class TestLoadErrors:
    def saved_blob(self, tmp_path):
        model = build_model(tiny_config("crf_only"), tiny_vocab())
        path = save_model(model, tmp_path / "m.seqtag")
        return path, bytearray(path.read_bytes())

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.seqtag"
        p.write_bytes(b"NOTAMODEL" + b"\x00" * 64)
        with pytest.raises(ModelFormatError, match="magic"):
            load_model(p)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "x.seqtag"
        p.write_bytes(b"")
        with pytest.raises(ModelFormatError):
            load_model(p)

    def test_magic_only(self, tmp_path):
        p = tmp_path / "x.seqtag"
        p.write_bytes(MODEL_MAGIC)
        with pytest.raises(ModelTruncatedError):
            load_model(p)

    def test_unsupported_version(self, tmp_path):
        path, blob = self.saved_blob(tmp_path)
        blob[len(MODEL_MAGIC)] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(ModelVersionError, match="99"):
            load_model(path)

    def test_truncated_mid_header(self, tmp_path):
        path, blob = self.saved_blob(tmp_path)
        path.write_bytes(bytes(blob[:30]))
        with pytest.raises(ModelTruncatedError):
            load_model(path)

    def test_truncated_mid_arrays(self, tmp_path):
        path, blob = self.saved_blob(tmp_path)
        path.write_bytes(bytes(blob[:-40]))
        with pytest.raises(ModelTruncatedError):
            load_model(path)

    def test_flipped_payload_byte(self, tmp_path):
        path, blob = self.saved_blob(tmp_path)
        blob[-40] ^= 0xFF  # inside the arrays, well before the digest
        path.write_bytes(bytes(blob))
        with pytest.raises(ModelChecksumError):
            load_model(path)

    def test_flipped_header_byte(self, tmp_path):
        path, blob = self.saved_blob(tmp_path)
        header_start = len(MODEL_MAGIC) + 1 + 8
        blob[header_start] ^= 0xFF  # breaks the json opening brace
        path.write_bytes(bytes(blob))
        with pytest.raises(ModelChecksumError):
            load_model(path)

    def test_trailing_garbage(self, tmp_path):
        path, blob = self.saved_blob(tmp_path)
        path.write_bytes(bytes(blob) + b"extra")
        with pytest.raises(ModelFormatError, match="trailing"):
            load_model(path)

    def test_manifest_variant_mismatch(self, tmp_path):
        # rewrite the header to claim a different variant; array names no
        # longer match what that variant builds
        path, blob = self.saved_blob(tmp_path)
        header_start = len(MODEL_MAGIC) + 1 + 8
        header_len = int.from_bytes(blob[len(MODEL_MAGIC) + 1:header_start], "big")
        header = json.loads(bytes(blob[header_start:header_start + header_len]))
        header["config"]["variant"] = "gru_crf"
        new_header = json.dumps(header, separators=(",", ":")).encode()
        body = (
            MODEL_MAGIC
            + bytes([MODEL_FORMAT_VERSION])
            + len(new_header).to_bytes(8, "big")
            + new_header
            + bytes(blob[header_start + header_len:-32])
        )
        path.write_bytes(body + hashlib.sha256(body).digest())
        with pytest.raises(ModelFormatError, match="manifest"):
            load_model(path)


class TestLearnability:
    def test_small_model_learns_synthetic_data(self):
        corpus = generate_synthetic_corpus(13, 120, vocab_size=30, n_tags=3)
        tr, va = corpus[:100], corpus[100:]
        vocab = build_vocab(tr, tag_source=corpus)
        cfg = ModelConfig(
            variant="gru_crf", embedding_dim=12, hidden_dim=12,
            learning_rate=0.05, epochs=6, seed=1,
        )
        model = build_model(cfg, vocab)
        report = train(model, tr, va)
        assert max(report.val_accuracy) > 90.0
