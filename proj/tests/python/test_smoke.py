import itertools
import os
import pathlib

import pytest

import cdstore

ROOT = pathlib.Path(__file__).resolve().parents[2]


def test_every_k_subset_decodes():
    params = cdstore.CodingParams(4, 3)
    secret = os.urandom(5000)
    shares = cdstore.encode(secret, params)
    assert len(shares) == 4
    assert all(len(s) == cdstore.share_size(5000, 3) for _, s in shares)
    for subset in itertools.combinations(shares, 3):
        assert cdstore.decode(list(subset), len(secret), params) == secret


def test_encoding_is_deterministic():
    secret = b"convergent" * 100
    assert cdstore.encode(secret) == cdstore.encode(secret)
    assert cdstore.encode(secret, salt=b"a") != cdstore.encode(secret, salt=b"b")


def test_too_few_shares_raises():
    shares = cdstore.encode(b"x" * 100)
    with pytest.raises(cdstore.CdstoreError):
        cdstore.decode(shares[:2], 100)


def test_invalid_params_raise():
    with pytest.raises(cdstore.CdstoreError):
        cdstore.CodingParams(3, 3)


def test_chunk_lengths_cover_input():
    data = os.urandom(1 << 20)
    sizes = cdstore.chunk(data)
    assert sum(sizes) == len(data)
    assert all(s <= 16384 for s in sizes)
    assert all(s >= 2048 for s in sizes[:-1])


def test_trace_analysis_counts_duplicates():
    report = cdstore.analyze_trace("1 0 aa 4096\n1 1 aa 4096\n2 1 aa 4096\n")
    assert report.total.chunks == 3
    assert report.total.logical_data == 3 * 4096
    assert report.total.transferred_shares == 2 * report.total.physical_shares
    assert "total" in str(report)


def test_cost_estimate_from_sample_pricing():
    pricing = (ROOT / "configs" / "pricing_2014.txt").read_text()
    report = cdstore.estimate_cost(16, 10, 26, pricing)
    assert report.saving_vs_single > 0.7
    assert report.saving_vs_aont > report.saving_vs_single


def test_scenario_round_trip():
    passed, text = cdstore.run_scenario(
        "n 4\nk 3\nseed 1\nfile a random 200000\nbackup 1 a\nstop 1\nrestore 1 a\n"
    )
    assert passed, text
