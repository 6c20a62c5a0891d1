import numpy as np
import pytest

from causalpatterns.activation import threshold
from causalpatterns.builder import build_activity_graph
from causalpatterns.components import extract_components
from causalpatterns.errors import ValidationError
from causalpatterns.synth import (
    PatternTemplate,
    SyntheticScenario,
    erdos_renyi_graph,
    generate_scenario,
    grid_graph,
    label_components,
    load_scenario_toml,
    random_edge_graph,
    read_truth_json,
    write_truth_json,
)


def scenario(**kw):
    base = dict(
        graph_family="grid",
        graph_params={"rows": 5, "cols": 8},
        num_steps=40,
        templates=(PatternTemplate(seed_node=0, radius_per_step=1, duration=4),),
        repetitions=1,
        noise_rate=0.0,
        seed=5,
    )
    base.update(kw)
    return SyntheticScenario(**base)


def extract(data, mu=0.5):
    mask = threshold(data.signal, mu)
    return extract_components(build_activity_graph(data.graph, mask))


def test_single_template_single_instance_exact():
    data = generate_scenario(scenario())
    result = extract(data)
    assert len(result.components) == 1
    assert result.num_singletons == 0
    (tpl, cells), = data.truth.instances
    assert tpl == 0
    assert result.components[0].member_set() == set(cells)


def test_no_templates_no_noise_empty():
    data = generate_scenario(scenario(templates=(), repetitions=0))
    assert data.signal.values.sum() == 0
    result = extract(data)
    assert result.components == [] and result.num_pairs == 0


def test_every_instance_lands_in_one_component():
    data = generate_scenario(scenario(
        templates=(PatternTemplate(0, 1, 4), PatternTemplate(39, 1, 4)),
        repetitions=6, num_steps=80, seed=9))
    result = extract(data)
    comp_of_cell = {}
    for comp in result.components:
        for cell in comp.member_set():
            comp_of_cell[cell] = comp.id
    for _tpl, cells in data.truth.instances:
        owners = {comp_of_cell[c] for c in cells}
        assert len(owners) == 1  # weakly connected by construction


def test_noise_only_mostly_singletons():
    sc = SyntheticScenario(
        graph_family="erdos_renyi",
        graph_params={"num_nodes": 200, "edge_prob": 0.005},
        num_steps=150, templates=(), repetitions=0, noise_rate=0.01, seed=0)
    data = generate_scenario(sc)
    result = extract(data)
    assert result.num_pairs == 300  # 1% of 200 x 150 cells
    assert result.num_singletons / result.num_pairs >= 0.95
    assert all(c.num_members <= 4 for c in result.components)


def test_noise_never_deactivates_patterns():
    clean = generate_scenario(scenario(noise_rate=0.0))
    noisy = generate_scenario(scenario(noise_rate=0.05))
    assert np.all(noisy.signal.values >= clean.signal.values)


def test_label_components_majority_vote():
    data = generate_scenario(scenario(
        templates=(PatternTemplate(0, 1, 4), PatternTemplate(39, 1, 4)),
        repetitions=3, num_steps=60, seed=2))
    result = extract(data)
    ids, labels = label_components(result.components, data.truth)
    assert set(labels) == {0, 1}
    assert len(ids) == len(labels)


def test_template_validation():
    with pytest.raises(ValidationError, match="seed node"):
        generate_scenario(scenario(templates=(PatternTemplate(999, 1, 3),)))
    with pytest.raises(ValidationError, match="duration"):
        generate_scenario(scenario(templates=(PatternTemplate(0, 1, 999),)))
    with pytest.raises(ValidationError, match="noise rate"):
        scenario(noise_rate=1.5)


def test_truth_json_round_trip(tmp_path):
    data = generate_scenario(scenario(repetitions=2, noise_rate=0.01))
    path = tmp_path / "truth.json"
    write_truth_json(data.truth, data.graph, path)
    back = read_truth_json(path, data.graph)
    assert back.instances == data.truth.instances
    assert back.cell_template == data.truth.cell_template


def test_scenario_toml(tmp_path):
    path = tmp_path / "s.toml"
    path.write_text(
        'family = "grid"\n'
        "num_steps = 50\n"
        "seed = 3\n"
        "noise_rate = 0.02\n"
        "repetitions = 4\n"
        "[graph]\nrows = 4\ncols = 5\n"
        "[[templates]]\nseed_node = 2\nradius_per_step = 1\nduration = 3\n"
        "[[templates]]\nseed_node = 17\nduration = 2\n",
        encoding="utf-8",
    )
    sc = load_scenario_toml(path)
    assert sc.graph_family == "grid"
    assert sc.num_steps == 50
    assert sc.templates == (PatternTemplate(2, 1, 3), PatternTemplate(17, 1, 2))
    assert sc.repetitions == 4
    data = generate_scenario(sc)
    assert data.graph.num_nodes == 20


def test_grid_graph_shape():
    g = grid_graph(3, 4)
    assert g.num_nodes == 12
    assert g.num_edges == 3 * 3 + 2 * 4  # horizontal + vertical
    assert g.has_edge(0, 1) and g.has_edge(0, 4) and not g.has_edge(0, 5)


def test_er_graph_seeded():
    a = erdos_renyi_graph(30, 0.2, seed=4)
    b = erdos_renyi_graph(30, 0.2, seed=4)
    assert np.array_equal(a.edges, b.edges)


def test_random_edge_graph_exact_count():
    g = random_edge_graph(500, 120, seed=1, directed=True)
    assert g.num_edges == 500
    assert g.num_nodes == 120
