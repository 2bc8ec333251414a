import numpy as np
import pytest

from screenforge.chem_graph import parse_smiles, renumbered
from screenforge.fingerprints import (
    ConfigMismatch,
    FingerprintConfig,
    FingerprintVector,
    circular_fingerprint,
    from_hex,
    popcount,
    to_hex,
)
from screenforge.simcluster import tanimoto


class TestConfig:
    def test_defaults(self):
        cfg = FingerprintConfig()
        assert (cfg.radius, cfg.nbits, cfg.hash_seed) == (2, 2048, 0)

    @pytest.mark.parametrize("nbits", [32, 63, 100, 3000])
    def test_nbits_must_be_power_of_two_and_large_enough(self, nbits):
        with pytest.raises(ValueError):
            FingerprintConfig(nbits=nbits)

    def test_radius_bounds(self):
        with pytest.raises(ValueError):
            FingerprintConfig(radius=7)
        with pytest.raises(ValueError):
            FingerprintConfig(radius=-1)


class TestCircularFingerprint:
    def test_methane_radius_zero_single_bit(self):
        fp = circular_fingerprint(parse_smiles("C"), FingerprintConfig(radius=0))
        assert popcount(fp) == 1

    def test_same_molecule_different_spellings(self):
        cfg = FingerprintConfig()
        a = circular_fingerprint(parse_smiles("OCC"), cfg)
        b = circular_fingerprint(parse_smiles("CCO"), cfg)
        assert a == b

    def test_benzene_radius_one_at_most_two_bits(self):
        fp = circular_fingerprint(parse_smiles("c1ccccc1"), FingerprintConfig(radius=1))
        assert popcount(fp) <= 2

    def test_isomorphism_invariance(self, corpus, rng):
        cfg = FingerprintConfig(nbits=512)
        for name, _, mol in corpus:
            reference = circular_fingerprint(mol, cfg)
            order = list(range(len(mol.atoms)))
            for _ in range(5):
                rng.shuffle(order)
                assert circular_fingerprint(renumbered(mol, order), cfg) == reference, name

    def test_largest_fragment_used(self):
        cfg = FingerprintConfig()
        assert circular_fingerprint(parse_smiles("CCO.[Na+]"), cfg) == circular_fingerprint(
            parse_smiles("CCO"), cfg
        )

    def test_seed_changes_bits(self):
        mol = parse_smiles("CC(=O)Oc1ccccc1C(=O)O")
        a = circular_fingerprint(mol, FingerprintConfig(hash_seed=0))
        b = circular_fingerprint(mol, FingerprintConfig(hash_seed=1))
        assert not np.array_equal(a.bits, b.bits)

    def test_stable_across_runs(self):
        # frozen at development time; a change means the hash is unstable
        fp = circular_fingerprint(parse_smiles("CCO"), FingerprintConfig(nbits=64, radius=1))
        assert to_hex(fp) == "r1b64s0:8000000300080020"


class TestPopcountAndSerialization:
    def test_popcount_zero_and_ones(self):
        cfg = FingerprintConfig(nbits=64)
        assert popcount(FingerprintVector(np.zeros(64, dtype=np.uint8), cfg)) == 0
        assert popcount(FingerprintVector(np.ones(64, dtype=np.uint8), cfg)) == 64

    def test_hex_round_trip(self, corpus):
        cfg = FingerprintConfig(nbits=128, radius=2, hash_seed=5)
        for name, _, mol in corpus[:10]:
            fp = circular_fingerprint(mol, cfg)
            assert from_hex(to_hex(fp)) == fp, name

    def test_malformed_hex_rejected(self):
        with pytest.raises(ValueError):
            from_hex("r2b2048s0")
        with pytest.raises(ValueError):
            from_hex("nonsense:00")

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            FingerprintVector(np.zeros(32, dtype=np.uint8), FingerprintConfig(nbits=64))


class TestConfigMismatch:
    def test_comparison_between_configs_raises(self):
        a = circular_fingerprint(parse_smiles("CCO"), FingerprintConfig(nbits=64))
        b = circular_fingerprint(parse_smiles("CCO"), FingerprintConfig(nbits=128))
        with pytest.raises(ConfigMismatch):
            tanimoto(a, b)
