import pytest

from szdet import __version__
from szdet.config import ConfigError, parse_config, schema_from_dataclass
from szdet.nse2d import SimConfig


@pytest.fixture
def schema():
    return schema_from_dataclass(SimConfig)


def test_typed_accessor(schema):
    cfg = parse_config("nu = 0.1\n", "simulate", *schema)
    assert cfg.get("nu") == 0.1
    assert cfg["M"] == 64


def test_unknown_key_named(schema):
    with pytest.raises(ConfigError, match="nuu"):
        parse_config("nuu = 0.1", "simulate", *schema)


def test_empty_file_records_all_defaults(schema):
    cfg = parse_config("", "simulate", *schema)
    header = cfg.header()
    assert header[0] == f"# szdet {__version__} simulate"
    assert header[1].startswith("# config_hash = ")
    assert header[2] == "# seed = 0"
    assert "# nu = 0.1" in header and "# forcing_kind = 'none'" in header
    assert len(header) == 3 + len(schema[0])


def test_dotted_keys_and_comments(schema):
    text = "# a comment\nforcing.kind = kolmogorov  # trailing\n\ninit.kind=zero\n"
    cfg = parse_config(text, "simulate", *schema)
    assert cfg["forcing.kind"] == "kolmogorov"
    assert cfg["init_kind"] == "zero"


def test_errors_carry_line_numbers(schema):
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("nu = 1\n\nthis line is wrong\n", "simulate", *schema)
    with pytest.raises(ConfigError, match="line 2: duplicate"):
        parse_config("nu = 1\nnu = 2\n", "simulate", *schema)
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("nu =\n", "simulate", *schema)
    with pytest.raises(ConfigError, match="M"):
        parse_config("M = 3.5\n", "simulate", *schema)


def test_hash_depends_on_values_not_spelling(schema):
    a = parse_config("nu = 0.1", "simulate", *schema)
    b = parse_config("nu=0.10\n# same value", "simulate", *schema)
    c = parse_config("nu = 0.2", "simulate", *schema)
    assert a.config_hash() == b.config_hash() != c.config_hash()


def test_bool_values():
    cfg = parse_config("flag = yes", "x", {"flag": False}, {"flag": "bool"})
    assert cfg["flag"] is True
    with pytest.raises(ConfigError):
        parse_config("flag = maybe", "x", {"flag": False}, {"flag": "bool"})


def test_build_dataclass(schema):
    sim = parse_config("t_end = 2.5\nseed = 9", "simulate", *schema).build(SimConfig)
    assert sim == SimConfig(t_end=2.5, seed=9)
