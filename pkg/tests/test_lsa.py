import numpy as np
import pytest
import scipy.sparse as sp

from semsearch.errors import EmptyQueryError, FormatError
from semsearch.lsa import (
    LsaModel,
    build_lsa,
    fold_in_query,
    load_lsa,
    lsa_rank,
    save_lsa,
    truncated_svd,
)
from semsearch.pipeline import Statement
from semsearch.weighting import tfidf_matrix

from oracles import singular_values_dense


def stmts(*token_lists):
    return [
        Statement(id=i, raw=" ".join(toks), tokens=tuple(toks))
        for i, toks in enumerate(token_lists)
    ]


def frobenius_error(matrix, u, s, v):
    dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
    return np.linalg.norm(dense - (u * s[None, :]) @ v.T)


class TestTruncatedSvd:
    def test_singular_values_match_dense_oracle(self):
        rng = np.random.default_rng(113)
        for rows, cols, k in ((6, 5, 3), (20, 10, 4), (9, 9, 5)):
            m = rng.normal(size=(rows, cols))
            _, s, _ = truncated_svd(sp.csr_matrix(m), k)
            want = singular_values_dense(m, k)
            np.testing.assert_allclose(s, want, atol=1e-6)

    def test_u_columns_orthonormal(self):
        rng = np.random.default_rng(127)
        m = rng.normal(size=(12, 7))
        u, _, _ = truncated_svd(sp.csr_matrix(m), 4)
        gram = u.T @ u
        np.testing.assert_allclose(gram, np.eye(4), atol=1e-6)

    def test_rank_one_matrix_reconstructs(self):
        rng = np.random.default_rng(131)
        m = np.outer(rng.normal(size=6), rng.normal(size=4))
        u, s, v = truncated_svd(sp.csr_matrix(m), 1)
        assert frobenius_error(m, u, s, v) <= 1e-8

    def test_identity_full_rank_dense_path(self):
        u, s, v = truncated_svd(np.eye(4), 4)
        np.testing.assert_allclose(s, np.ones(4), atol=1e-12)
        np.testing.assert_allclose(u @ u.T, np.eye(4), atol=1e-12)
        np.testing.assert_allclose((u * s) @ v.T, np.eye(4), atol=1e-12)

    def test_frobenius_error_non_increasing_in_k(self):
        rng = np.random.default_rng(137)
        m = rng.normal(size=(8, 6))
        sparse = sp.csr_matrix(m)
        errors = [
            frobenius_error(m, *truncated_svd(sparse, k)) for k in range(1, 7)
        ]
        for lo, hi in zip(errors[1:], errors[:-1]):
            assert lo <= hi + 1e-9

    def test_descending_positive_singular_values(self):
        rng = np.random.default_rng(139)
        m = rng.normal(size=(10, 8))
        _, s, _ = truncated_svd(sp.csr_matrix(m), 5)
        assert (s > 0).all()
        assert (np.diff(s) <= 1e-12).all()

    def test_same_seed_reproduces_bitwise(self):
        rng = np.random.default_rng(149)
        m = sp.csr_matrix(rng.normal(size=(15, 9)))
        u1, s1, v1 = truncated_svd(m, 4, seed=7)
        u2, s2, v2 = truncated_svd(m, 4, seed=7)
        np.testing.assert_array_equal(u1, u2)
        np.testing.assert_array_equal(s1, s2)
        np.testing.assert_array_equal(v1, v2)

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            truncated_svd(np.eye(3), 4)
        with pytest.raises(ValueError):
            truncated_svd(np.eye(3), 0)


FIXTURE = stmts(
    ["apple", "banana", "apple"],
    ["banana", "cherry"],
    ["cherry", "date", "elder", "cherry", "apple"],
)


class TestFoldIn:
    def test_matches_dense_oracle_scores(self):
        matrix = tfidf_matrix(FIXTURE)
        model = build_lsa(matrix, k=2)
        dense = matrix.weights.toarray()
        u_full, s_full, vt_full = np.linalg.svd(dense, full_matrices=False)
        u2, s2, v2 = u_full[:, :2], s_full[:2], vt_full[:2].T

        tokens = ["apple", "cherry", "cherry"]
        q = np.zeros(len(matrix.terms))
        for t in tokens:
            q[matrix.terms.index(t)] += matrix.idf[matrix.terms.index(t)]
        q_hat_oracle = (u2.T @ q) / s2
        docs_oracle = v2 * s2[None, :]
        want = {
            doc_id: float(
                docs_oracle[i]
                @ q_hat_oracle
                / (np.linalg.norm(docs_oracle[i]) * np.linalg.norm(q_hat_oracle))
            )
            for i, doc_id in enumerate(matrix.doc_ids)
        }

        got = dict(lsa_rank(model, tokens, 3))
        assert set(got) == set(want)
        for doc_id in want:
            assert got[doc_id] == pytest.approx(want[doc_id], abs=1e-6)

    def test_folded_vector_matches_oracle_up_to_sign(self):
        matrix = tfidf_matrix(FIXTURE)
        model = build_lsa(matrix, k=2)
        dense = matrix.weights.toarray()
        u_full, s_full, _ = np.linalg.svd(dense, full_matrices=False)
        q = np.zeros(len(matrix.terms))
        pos = matrix.terms.index("banana")
        q[pos] = matrix.idf[pos]
        q_hat = fold_in_query(model, ["banana"])
        oracle = (u_full[:, :2].T @ q) / s_full[:2]
        np.testing.assert_allclose(np.abs(q_hat), np.abs(oracle), atol=1e-6)

    def test_no_overlap_raises(self):
        model = build_lsa(tfidf_matrix(FIXTURE), k=2)
        with pytest.raises(EmptyQueryError):
            fold_in_query(model, ["mango", "kiwi"])

    def test_query_counts_accumulate(self):
        model = build_lsa(tfidf_matrix(FIXTURE), k=2)
        once = fold_in_query(model, ["apple"])
        twice = fold_in_query(model, ["apple", "apple"])
        np.testing.assert_allclose(twice, 2 * once, atol=1e-12)


class TestRanking:
    def test_verbatim_query_wins_on_disjoint_topics(self):
        corpus = stmts(
            ["alpha", "beta", "alpha"],
            ["gamma", "delta"],
            ["epsilon", "zeta", "zeta"],
        )
        model = build_lsa(tfidf_matrix(corpus), k=3)
        ranked = lsa_rank(model, ["gamma", "delta"], 3)
        assert ranked[0][0] == 1
        assert ranked[0][1] == pytest.approx(1.0, abs=1e-9)

    def test_self_cosine_is_one(self):
        model = build_lsa(tfidf_matrix(FIXTURE), k=2)
        docs = model.doc_vectors()
        for row in docs:
            norm = np.linalg.norm(row)
            if norm > 0:
                assert row @ row / (norm * norm) == pytest.approx(1.0, abs=1e-9)

    def test_k_results_truncates(self):
        model = build_lsa(tfidf_matrix(FIXTURE), k=2)
        assert len(lsa_rank(model, ["apple"], 1)) == 1
        assert len(lsa_rank(model, ["apple"], 50)) == 3

    def test_duplicated_statement_scores_agree(self):
        corpus = stmts(["apple", "banana"], ["apple", "banana"], ["cherry", "date"])
        model = build_lsa(tfidf_matrix(corpus), k=2)
        got = dict(lsa_rank(model, ["apple"], 3))
        assert 0 in got and 1 in got
        assert got[0] == pytest.approx(got[1], abs=1e-9)

    def test_exact_ties_break_by_ascending_id(self):
        # Hand-built model with bitwise-identical document vectors.
        model = LsaModel(
            terms=("t0", "t1"),
            doc_ids=(4, 2, 7),
            k=2,
            u=np.eye(2),
            s=np.array([2.0, 1.0]),
            v=np.array([[0.5, 0.5], [0.5, 0.5], [-0.5, 0.5]]),
            idf=np.array([1.0, 1.0]),
        )
        ranked = lsa_rank(model, ["t0"], 3)
        assert [doc_id for doc_id, _ in ranked[:2]] == [2, 4]

    def test_zero_latent_documents_never_returned(self):
        model = LsaModel(
            terms=("t0",),
            doc_ids=(0, 1),
            k=1,
            u=np.eye(1),
            s=np.array([1.0]),
            v=np.array([[1.0], [0.0]]),
            idf=np.array([1.0]),
        )
        ranked = lsa_rank(model, ["t0"], 5)
        assert [doc_id for doc_id, _ in ranked] == [0]

    def test_rebuild_is_deterministic(self):
        matrix = tfidf_matrix(FIXTURE)
        a = build_lsa(matrix, k=2, seed=3)
        b = build_lsa(matrix, k=2, seed=3)
        np.testing.assert_array_equal(a.u, b.u)
        np.testing.assert_array_equal(a.s, b.s)
        np.testing.assert_array_equal(a.v, b.v)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        model = build_lsa(tfidf_matrix(FIXTURE), k=2)
        path = tmp_path / "model.lsa"
        save_lsa(model, path)
        back = load_lsa(path)
        assert back.terms == model.terms
        assert back.doc_ids == model.doc_ids
        assert back.k == model.k
        np.testing.assert_array_equal(back.u, model.u)
        np.testing.assert_array_equal(back.s, model.s)
        np.testing.assert_array_equal(back.v, model.v)
        np.testing.assert_array_equal(back.idf, model.idf)
        assert lsa_rank(back, ["apple"], 3) == lsa_rank(model, ["apple"], 3)

    def test_wrong_kind_rejected(self, tmp_path):
        path = tmp_path / "bogus"
        path.write_bytes(b"SEMSEARCH-PV v1\n{}\n")
        with pytest.raises(FormatError):
            load_lsa(path)
