"""End-to-end architecture tests: encoding algebra, head behavior under
rigged weights, loss structure, and checkpoint round-trips."""

import json

import numpy as np
import pytest

from framepath import autodiff as ad
from framepath.config import Config
from framepath.corpus import FrameAnnotation, Ontology, Sentence, build_vocab
from framepath.model import FrameParser
from framepath.syntax import parse_bracketed

from helpers import assert_grads_ok


def tiny_config(**overrides) -> Config:
    base = dict(token_dim=12, pos_dim=4, gcn_emb_dim=6, gcn_dim=6,
                gcn_layers=2, lstm_hidden=8, lstm_layers=2, lu_dim=5,
                frame_dim=5, fi_hidden1=7, fi_hidden2=6, ai_pr_dim=6,
                ai_pb_dim=6, ac_dim=6, seed=3)
    base.update(overrides)
    return Config(**base)


def make_ontology() -> Ontology:
    return Ontology(
        lu_to_frames={
            "run.v": ["Motion", "Operating"],
            "dog.n": ["Animal"],
            "give.v": ["Giving"],
        },
        frame_to_elements={
            "Motion": ["Mover", "Path"],
            "Operating": ["Agent"],
            "Animal": ["Kind"],
            "Giving": ["Donor", "Recipient", "Theme"],
        },
    )


def make_sentence() -> Sentence:
    tree = parse_bracketed(
        "(S (NP (DT the) (NN dog)) (VP (VBD ran) (PP (IN down) (NN hill))))")
    return Sentence(
        tokens=["the", "dog", "ran", "down", "hill"],
        pos=["DT", "NN", "VBD", "IN", "NN"],
        tree=tree,
        annotations=[
            FrameAnnotation(target=[2], lu="run.v", frame="Motion",
                            elements=[((0, 1), "Mover"), ((3, 4), "Path")]),
            FrameAnnotation(target=[1], lu="dog.n", frame="Animal",
                            elements=[((0, 0), "Kind")]),
        ],
    )


def make_model(**overrides) -> tuple[FrameParser, Sentence]:
    onto = make_ontology()
    sent = make_sentence()
    vocab = build_vocab([sent], onto)
    return FrameParser(tiny_config(**overrides), vocab, onto), sent


def zero_params(model, prefix):
    for path, entry in model.store.entries():
        if path.startswith(prefix):
            entry.tensor.data[:] = 0.0


# ---------------------------------------------------------------------------
# encoding

class TestEncoding:
    def test_zero_bilstm_gives_layernormed_e(self):
        model, sent = make_model()
        zero_params(model, "enc.a.lstm")
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            enc = model.encode(prep)
            e, a = enc.e.data, enc.a.data
        mu = e.mean(axis=1, keepdims=True)
        var = e.var(axis=1, keepdims=True)
        expected = (e - mu) / np.sqrt(var + 1e-5)
        assert np.allclose(a, expected, atol=1e-12)

    def test_b_cache_shared_by_first_index(self):
        model, sent = make_model()
        calls = []
        inner = model.lstm_b

        def counting(x):
            calls.append(1)
            return inner(x)

        model.lstm_b = counting
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            enc = model.encode(prep)
            first = enc.b(2)
            again = enc.b(2)
            other = enc.b(1)
        assert first is again
        assert other is not first
        assert len(calls) == 2

    def test_tree_change_changes_a(self):
        model, sent = make_model()
        prep1 = model.prepare(sent)
        rebracketed = parse_bracketed(
            "(S (NP (DT the) (NN dog) (VBD ran)) (PP (IN down) (NN hill)))")
        sent2 = Sentence(tokens=sent.tokens, pos=sent.pos, tree=rebracketed)
        prep2 = model.prepare(sent2)
        with ad.fresh_tape(), ad.no_grad():
            a1 = model.encode(prep1).a.data
            a2 = model.encode(prep2).a.data
        assert not np.allclose(a1, a2)

    def test_no_gcn_zero_paths_same_dims(self):
        model, sent = make_model(use_gcn=False)
        assert not any(p.startswith("gcn.") for p in model.store.paths())
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            enc = model.encode(prep)
            assert enc.a.data.shape == (5, model.e_dim)
            loss = model.loss([prep], "joint")
        assert np.isfinite(loss.data)


class TestTargetRepr:
    def test_singleton_is_row(self):
        model, sent = make_model()
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            enc = model.encode(prep)
            t = model.target_repr(enc, [3]).data
            assert np.array_equal(t, enc.a.data[3])

    def test_discontiguous_sum_and_order(self):
        model, sent = make_model()
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            enc = model.encode(prep)
            t = model.target_repr(enc, [2, 4]).data
            rev = model.target_repr(enc, [4, 2]).data
            assert np.allclose(t, enc.a.data[2] + enc.a.data[4], atol=1e-12)
            assert np.array_equal(t, rev)

    def test_empty_rejected(self):
        model, sent = make_model()
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            enc = model.encode(prep)
            with pytest.raises(ValueError):
                model.target_repr(enc, [])


# ---------------------------------------------------------------------------
# frame identification

class TestFrameId:
    def test_single_frame_lu_forced(self):
        model, sent = make_model()
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            enc = model.encode(prep)
            assert model.fi_predict(enc, [1], "dog.n") == "Animal"

    def test_zero_weights_two_frame_symmetry(self):
        model, sent = make_model()
        zero_params(model, "fi.")
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            enc = model.encode(prep)
            scores = model.fi_scores(enc, [2], "run.v").data
        probs = np.exp(scores - scores.max())
        probs /= probs.sum()
        allowed = model.ontology.frame_mask("run.v")
        assert np.allclose(probs[allowed], 0.5, atol=1e-40)

    def test_masked_softmax_normalizes_over_allowed(self):
        model, sent = make_model()
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            enc = model.encode(prep)
            scores = model.fi_scores(enc, [2], "run.v").data
        log_probs = scores - np.log(np.exp(scores - scores.max()).sum()) \
            - scores.max()
        probs = np.exp(log_probs)
        allowed = model.ontology.frame_mask("run.v")
        assert abs(probs[allowed].sum() - 1.0) < 1e-12
        assert probs[~allowed].max() < 1e-40

    def test_unknown_lu_rejected(self):
        model, sent = make_model()
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            enc = model.encode(prep)
            with pytest.raises(KeyError):
                model.fi_scores(enc, [2], "fly.v")


# ---------------------------------------------------------------------------
# argument identification

class TestArgId:
    def test_z_dim_and_pr_range(self):
        model, sent = make_model()
        c = model.config
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            enc = model.encode(prep)
            z, pr = model.predicate_repr(enc, [2], 0, 0)
        assert z.data.shape == (c.lu_dim + model.e_dim + c.frame_dim,)
        assert pr.data.shape == (c.ai_pr_dim,)
        assert np.all(np.abs(pr.data) < 1.0)

    def test_zero_v1_zeroes_emissions(self):
        model, sent = make_model()
        zero_params(model, "srl.ai.v1")
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            enc = model.encode(prep)
            _, pr = model.predicate_repr(enc, [2], 0, 0)
            emissions = model.ai_emissions(enc, [2], pr).data
        assert np.array_equal(emissions, np.zeros((5, 3)))

    def test_bilinear_matches_double_loop(self):
        model, sent = make_model()
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            enc = model.encode(prep)
            _, pr = model.predicate_repr(enc, [2], 1, 2)
            emissions = model.ai_emissions(enc, [2], pr).data
            b = enc.b(2).data
        v2w = model.store["srl.ai.v2.w"].data
        v2b = model.store["srl.ai.v2.b"].data
        pb = np.tanh(b @ v2w + v2b)
        for i in range(5):
            for k in range(3):
                want = float(pr.data @ model.ai_u[k].data @ pb[i])
                assert abs(emissions[i, k] - want) < 1e-10

    def test_predicted_spans_disjoint_sorted(self):
        model, sent = make_model()
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            enc = model.encode(prep)
            spans = model.ai_predict(enc, [2], "run.v", "Motion")
        for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
            assert e1 < s2


# ---------------------------------------------------------------------------
# argument classification

class TestArgClass:
    def test_single_fe_frame_forced(self):
        model, sent = make_model()
        prep = model.prepare(sent)
        spans = [(0, 1), (3, 4)]
        with ad.fresh_tape(), ad.no_grad():
            enc = model.encode(prep)
            labels = model.ac_predict(enc, [1], "dog.n", "Animal", spans)
        assert labels == ["Kind", "Kind"]

    def test_licensed_labels_only(self):
        model, sent = make_model()
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            enc = model.encode(prep)
            labels = model.ac_predict(enc, [2], "run.v", "Motion",
                                      [(0, 0), (1, 1), (3, 4)])
        assert set(labels) <= {"Mover", "Path"}

    def test_emissions_match_manual_recompute(self):
        # single-token span exercises r_w = b_start
        model, sent = make_model()
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            enc = model.encode(prep)
            z, _ = model.predicate_repr(enc, [2], 1, 2)
            emissions = model.ac_emissions(enc, [2], z, [(3, 3), (0, 1)],
                                           None).data
            b = enc.b(2).data
        yw = model.store["srl.ac.y.w"].data
        yb = model.store["srl.ac.y.b"].data
        ew = model.store["srl.ac.emit.w"].data
        eb = model.store["srl.ac.emit.b"].data
        for row, r in zip(emissions, [b[3], b[0] + b[1]]):
            q = np.tanh(np.concatenate([r, z.data]) @ yw + yb)
            assert np.allclose(row, q @ ew + eb, atol=1e-10)

    def test_empty_span_list(self):
        model, sent = make_model()
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            enc = model.encode(prep)
            assert model.ac_predict(enc, [2], "run.v", "Motion", []) == []


# ---------------------------------------------------------------------------
# losses

class TestLosses:
    def test_all_losses_finite_nonnegative(self):
        model, sent = make_model()
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            parts = model.batch_losses([prep])
        for name, t in parts.items():
            v = float(t.data)
            assert np.isfinite(v) and v >= 0.0, name

    def test_unannotated_sentence_zeroes_fi_srl(self):
        model, sent = make_model()
        bare = Sentence(tokens=sent.tokens, pos=sent.pos, tree=sent.tree)
        prep = model.prepare(bare)
        with ad.fresh_tape(), ad.no_grad():
            parts = model.batch_losses([prep])
        assert float(parts["fi"].data) == 0.0
        assert float(parts["srl"].data) == 0.0
        assert float(parts["ti"].data) > 0.0

    def test_ti_loss_is_all_o_nll_when_unannotated(self):
        model, sent = make_model()
        bare = Sentence(tokens=sent.tokens, pos=sent.pos, tree=sent.tree)
        prep = model.prepare(bare)
        with ad.fresh_tape(), ad.no_grad():
            loss = float(model.loss([prep], "ti").data)
            enc = model.encode(prep)
            direct = float(model.ti_crf.nll(model.ti_emissions(enc),
                                            [0] * 5, True).data)
        assert abs(loss - direct) < 1e-12

    def test_discontinuous_gold_tags_encode_and_score(self):
        model, sent = make_model()
        split = Sentence(
            tokens=sent.tokens, pos=sent.pos, tree=sent.tree,
            annotations=[
                FrameAnnotation(target=[1], lu="dog.n", frame="Animal"),
                FrameAnnotation(target=[2, 4], lu="run.v", frame="Motion"),
            ])
        prep = model.prepare(split)
        assert prep.ti_tags == [0, 1, 1, 0, 3]
        with ad.fresh_tape(), ad.no_grad():
            loss = float(model.loss([prep], "ti").data)
        assert np.isfinite(loss) and loss > 0.0

    def test_duplicated_batch_same_means(self):
        model, sent = make_model()
        prep = model.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            one = model.batch_losses([prep])
            two = model.batch_losses([prep, prep])
        for name in one:
            assert abs(float(one[name].data) - float(two[name].data)) < 1e-12

    def test_joint_is_sum_of_parts(self):
        model, sent = make_model()
        extra = Sentence(tokens=sent.tokens, pos=sent.pos, tree=sent.tree)
        preps = [model.prepare(sent), model.prepare(extra)]
        with ad.fresh_tape(), ad.no_grad():
            joint = float(model.loss(preps, "joint").data)
            total = sum(float(model.loss(preps, t).data)
                        for t in ("ti", "fi", "srl"))
        assert abs(joint - total) <= 1e-12

    def test_empty_batch_rejected(self):
        model, _ = make_model()
        with pytest.raises(ValueError):
            model.batch_losses([])


class TestGradients:
    def test_joint_loss_full_model_gradcheck(self):
        model, sent = make_model(
            token_dim=6, pos_dim=2, gcn_emb_dim=4, gcn_dim=4, lstm_hidden=4,
            lstm_layers=1, lu_dim=3, frame_dim=3, fi_hidden1=5, fi_hidden2=4,
            ai_pr_dim=4, ai_pb_dim=4, ac_dim=4, seed=11)
        # zero-init biases can park a relu pre-activation exactly on its
        # kink; check at a generic nearby point instead
        noise = np.random.default_rng(7)
        for _, entry in model.store.entries():
            entry.tensor.data += noise.normal(0.0, 0.05,
                                              entry.tensor.data.shape)
        prep = model.prepare(sent)
        params = [e.tensor for _, e in model.trainable_entries("joint")]
        assert_grads_ok(lambda: model.loss([prep], "joint"),
                        params, tol=1e-4)

    def test_gcn_params_all_reached_by_srl_loss(self):
        model, sent = make_model()
        prep = model.prepare(sent)
        with ad.fresh_tape():
            ad.backward(model.loss([prep], "srl"))
        for path, entry in model.store.entries():
            if path.startswith("gcn."):
                assert entry.tensor.grad is not None, path
                assert np.any(entry.tensor.grad != 0.0), path


# ---------------------------------------------------------------------------
# task parameter selection

class TestTrainableSets:
    def test_prefix_partitions(self):
        model, _ = make_model()
        all_paths = set(model.store.paths())
        joint = {p for p, _ in model.trainable_entries("joint")}
        assert joint == all_paths
        ti = {p for p, _ in model.trainable_entries("ti")}
        assert any(p.startswith("ti.") for p in ti)
        assert not any(p.startswith("srl.") or p.startswith("fi.")
                       for p in ti)
        srl = {p for p, _ in model.trainable_entries("srl")}
        assert any(p.startswith("enc.b.") for p in srl)
        assert not any(p.startswith("enc.b.") for p in ti)

    def test_penalty_groups(self):
        model, _ = make_model()
        srl = model.penalty_terms("srl")
        assert len(srl) == 3 + 2  # three bilinear maps, two srl CRFs
        ti = model.penalty_terms("ti")
        assert len(ti) == 1
        coeffs = {c for _, c in srl}
        assert coeffs == {model.config.l2_crf, model.config.l2_bilinear}


# ---------------------------------------------------------------------------
# pipeline and persistence

class TestPipeline:
    def test_parse_output_well_formed(self):
        model, sent = make_model()
        anns, dropped = model.parse(sent)
        assert dropped >= 0
        for ann in anns:
            assert ann.lu in model.ontology.lu_to_frames
            assert ann.frame in model.ontology.lu_to_frames[ann.lu]
            licensed = set(model.ontology.frame_to_elements[ann.frame])
            for (s, e), label in ann.elements:
                assert 0 <= s <= e < len(sent)
                assert label in licensed

    def test_vocab_ontology_mismatch_rejected(self):
        onto = make_ontology()
        sent = make_sentence()
        vocab = build_vocab([sent], onto)
        other = Ontology(lu_to_frames={"run.v": ["Motion"]},
                         frame_to_elements={"Motion": ["Mover"]})
        with pytest.raises(ValueError):
            FrameParser(tiny_config(), vocab, other)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        model, sent = make_model()
        path = str(tmp_path / "model.json")
        model.save(path)
        clone = FrameParser.load(path)
        assert clone.store.paths() == model.store.paths()
        for p in model.store.paths():
            assert np.array_equal(clone.store[p].data, model.store[p].data), p
        prep_a = model.prepare(sent)
        prep_b = clone.prepare(sent)
        with ad.fresh_tape(), ad.no_grad():
            la = float(model.loss([prep_a], "joint").data)
            lb = float(clone.loss([prep_b], "joint").data)
        assert la == lb

    def test_checkpoint_is_plain_json(self, tmp_path):
        model, _ = make_model()
        path = str(tmp_path / "model.json")
        model.save(path)
        with open(path) as fh:
            doc = json.load(fh)
        assert set(doc) == {"config", "vocab", "ontology", "params"}
        some = doc["params"]["emb.token"]
        assert set(some) == {"shape", "values"}
