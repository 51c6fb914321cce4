import unittest
import shutil
import tempfile
from wearable_graph_project.config.config import RetrievalConfig
from wearable_graph_project.core.graph_store import init_general_graph, load_graph, save_graph
from wearable_graph_project.core.ingestion import load_cohort
from wearable_graph_project.core.queryset import build_query_set
from wearable_graph_project.core.retrieval import parse_query, retrieve
from wearable_graph_project.core.synthetic import generate_synthetic_cohort, synthetic_metric_records, write_cohort
from wearable_graph_project.tools.providers import StubEmbeddings, stub_knowledge

QUERY_COUNT = 100


def run_pipeline(workdir: str, seed: int) -> str:
    """Synthetic cohort on disk -> graph -> query set -> retrieval; returns everything produced as one string."""
    write_cohort(generate_synthetic_cohort(n_subjects=10, n_days=120, seed=seed), workdir)
    cohort = load_cohort(workdir)
    by_id = {s.subject_id: s for s in cohort}

    embedder = StubEmbeddings()
    graph_path = f"{workdir}/graph.json"
    save_graph(init_general_graph(synthetic_metric_records(), stub_knowledge(), embedder), graph_path)
    graph = load_graph(graph_path)

    queries = build_query_set(cohort, seed=seed)
    step = max(1, len(queries) // QUERY_COUNT)
    picked = queries[::step][:QUERY_COUNT]

    cfg = RetrievalConfig()
    out = [graph.model_dump_json(exclude={"edges"})]
    for query in picked:
        parsed = parse_query(query.question, graph.node_names(), reference_time=query.input.timestamp)
        result = retrieve(graph, cohort, by_id[query.subject_id], parsed, cfg, embedder=embedder)
        out.append(query.model_dump_json())
        out.append(result.model_dump_json())
    return "\n".join(out)


class TestEndToEndDeterminism(unittest.TestCase):
    def setUp(self):
        self.dirs = [tempfile.mkdtemp(), tempfile.mkdtemp()]

    def tearDown(self):
        for d in self.dirs:
            shutil.rmtree(d)

    def test_two_runs_are_byte_identical(self):
        first = run_pipeline(self.dirs[0], seed=42)
        second = run_pipeline(self.dirs[1], seed=42)
        self.assertEqual(first.count('"query_id"'), QUERY_COUNT)
        self.assertEqual(first, second)

    def test_queries_reach_the_graph(self):
        output = run_pipeline(self.dirs[0], seed=3)
        self.assertIn("Matched nodes:", output)
        self.assertIn("Nodes related to matched nodes which might be helpful:", output)

if __name__ == "__main__":
    unittest.main()
