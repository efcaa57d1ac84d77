import pytest

from fedglm.errors import ConfigError
from fedglm.experiment import parse_grid, replica_diff, replica_seed, run_cell, run_grid


def test_parse_grid_lists_and_ranges():
    g = parse_grid("n=100,1000; p=1,3 ;nodes=10:30:10")
    assert g == {"n": [100, 1000], "p": [1, 3], "nodes": [10, 20, 30]}


@pytest.mark.parametrize("text", ["n=100;p=1", "n=a;p=1;nodes=2", "q=1;n=1;p=1;nodes=1"])
def test_parse_grid_rejects(text):
    with pytest.raises(ConfigError):
        parse_grid(text)


def test_replica_seed_depends_on_cell_not_nodes():
    assert replica_seed(0, 100, 3, 1) == replica_seed(0, 100, 3, 1)
    assert replica_seed(0, 100, 3, 1) != replica_seed(0, 100, 3, 2)
    assert replica_seed(0, 100, 3, 1) != replica_seed(0, 1000, 3, 1)


def test_cell_is_reproducible():
    a = run_cell("lm", 100, 3, 5, 3, seed=1)
    b = run_cell("lm", 100, 3, 5, 3, seed=1)
    assert a == b and a.mae <= 1e-12


def test_separated_replica_is_compared_at_maxit():
    # this replica draws a perfectly separated binomial sample
    diff, converged = replica_diff("glm", 100, 5, 5, replica_seed(2024, 100, 5, 16))
    assert not converged
    assert diff.mean() <= 1e-6
    cell = run_cell("glm", 100, 5, 5, 17, seed=2024)
    assert cell.nonconverged == 1 and cell.mae <= 1e-6


def test_grid_validation():
    with pytest.raises(ConfigError):
        run_grid("svm", [10], [1], [1], 1)
    with pytest.raises(ConfigError):
        run_grid("lm", [10], [1], [1], 0)
