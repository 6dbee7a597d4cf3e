import pytest

from cma import config
from cma.errors import ParseError, ValidationError

MINIMAL = """
[run]
command = solve
[grid]
n = 1
m = 64
[rhs]
kind = smooth
"""


def test_minimal_config_is_valid():
    cfg = config.parse_config(MINIMAL, env={})
    assert (cfg.n, cfg.m, cfg.command) == (1, 64, "solve")
    assert cfg.rhs.kind == "smooth" and cfg.lam == 0
    assert cfg.grid().size == 64 ** 2


def test_comments_and_whitespace():
    text = "# header\n[run]  # trailing\ncommand = solve   # why\n\n[grid]\nn=1\nm = 64\n[rhs]\nkind=smooth\n"
    assert config.parse_config(text, env={}).m == 64


def test_subcritical_p0_names_field():
    text = MINIMAL.replace("n = 1", "n = 2").replace("m = 64", "m = 8") + "[run]\n"
    with pytest.raises(ParseError):
        config.parse_config(text, env={})  # duplicate section
    text = "[run]\ncommand = solve\np0 = 4\n[grid]\nn = 2\nm = 8\n[rhs]\nkind = smooth\n"
    with pytest.raises(ValidationError) as exc:
        config.parse_config(text, env={})
    assert exc.value.field == "run.p0"


@pytest.mark.parametrize("text,line,column", [
    ("[run]\ncommand = solve\n  bogus = 1\n", 3, 3),
    ("[nope]\n", 1, 2),
    ("[run]\ncommand\n", 2, 1),
    ("n = 1\n", 1, 1),
    ("[grid]\nn = 1\nn = 2\n", 3, 1),
    ("[grid]\nn = one\n", 2, 5),
])
def test_parse_errors_carry_position(text, line, column):
    with pytest.raises(ParseError) as exc:
        config.parse_config(text, env={})
    assert (exc.value.line, exc.value.column) == (line, column)


@pytest.mark.parametrize("patch,field", [
    (("m = 64", "m = 7"), "grid"),
    (("kind = smooth", "kind = wavy"), "rhs.kind"),
    (("kind = smooth", "kind = smooth\nbandwidth = 40"), "rhs.bandwidth"),
    (("command = solve", "command = solve\nlambda = 2"), "run.lambda"),
])
def test_validation_errors(patch, field):
    with pytest.raises(ValidationError) as exc:
        config.parse_config(MINIMAL.replace(*patch), env={})
    assert exc.value.field == field


def test_seed_env_override():
    cfg = config.parse_config(MINIMAL + "seed = 4\n", env={})
    assert cfg.rhs.seed == 4
    cfg = config.parse_config(MINIMAL + "seed = 4\n", env={"CMA_SEED": "11"})
    assert cfg.seed == 11 and cfg.rhs.seed == 11
    with pytest.raises(ValidationError):
        config.parse_config(MINIMAL, env={"CMA_SEED": "x"})


def test_family_is_cartesian_product():
    text = ("[run]\ncommand = sweep\n[grid]\nn = 1\nm = 64\n[rhs]\nkind = smooth\n"
            "[family]\namplitudes = 0.1, 0.2\nseeds = 0, 1, 2\n")
    cfg = config.parse_config(text, env={})
    assert len(cfg.family) == 6
    assert {(s.amplitude, s.seed) for s in cfg.family} == {(a, s) for a in (0.1, 0.2) for s in (0, 1, 2)}


def test_check_inequalities_needs_no_grid():
    cfg = config.parse_config("[run]\ncommand = check-inequalities\n[inequalities]\nsamples = 10\n", env={})
    assert cfg.samples == 10 and cfg.dims == (2, 3, 4, 5)
