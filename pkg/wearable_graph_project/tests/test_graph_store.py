import unittest
import json
import os
import shutil
import tempfile
from unittest.mock import MagicMock
from wearable_graph_project.core.errors import (
    ArgumentError, DuplicateMetricError, GraphSchemaError, NodeNotFoundError, ProviderError, SchemaVersionError,
)
from wearable_graph_project.core.graph_store import (
    GraphStore, graph_from_document, graph_to_document, init_general_graph, integrate_metric, load_graph,
    neighborhood, save_graph,
)
from wearable_graph_project.core.state import MetricRecord, NodeCategory, ValueKind
from wearable_graph_project.tools.providers import StubEmbeddings, stub_knowledge

FIXTURE = os.path.join(os.path.dirname(__file__), "fixtures", "knowledge_fixture.json")


class TestInitGeneralGraph(unittest.TestCase):
    def test_complete_graph_with_default_strength(self):
        graph = init_general_graph(["Steps taken", "Anxiety", "Mood"], stub_knowledge())
        self.assertEqual(len(graph.nodes), 3)
        self.assertEqual(len(graph.edges), 3)
        self.assertTrue(all(e.prior_weight == 0.5 for e in graph.edges.values()))
        self.assertEqual(sorted(graph.nodes), ["anxiety", "mood", "steps_taken"])

    def test_weak_pairs_are_dropped(self):
        graph = init_general_graph(["Lifelog", "Maximum distance from home"], stub_knowledge(FIXTURE))
        self.assertEqual(len(graph.edges), 0)

    def test_fixture_strengths(self):
        graph = init_general_graph(["Active time", "Sleep efficiency"], stub_knowledge(FIXTURE))
        edge = graph.edge("sleep_efficiency", "active_time")
        self.assertEqual(edge.prior_weight, 0.8)
        self.assertEqual(edge.endpoints, ("active_time", "sleep_efficiency"))

    def test_duplicate_names(self):
        with self.assertRaises(DuplicateMetricError) as context:
            init_general_graph(["Heart Rate", "heart  rate", "Mood"], stub_knowledge())
        self.assertEqual(context.exception.duplicates, ["heart rate"])

    def test_empty_input(self):
        with self.assertRaises(ArgumentError):
            init_general_graph([], stub_knowledge())

    def test_embeddings_attached(self):
        graph = init_general_graph(["Mood"], stub_knowledge(), StubEmbeddings())
        self.assertEqual(len(graph.nodes["mood"].name_embedding), 64)

    def test_provider_failure(self):
        knowledge = MagicMock()
        knowledge.node_gen.side_effect = RuntimeError("model offline")
        with self.assertRaises(ProviderError) as context:
            init_general_graph(["Mood"], knowledge)
        self.assertEqual(context.exception.subject, "Mood")


class TestIntegrateMetric(unittest.TestCase):
    def setUp(self):
        self.knowledge = stub_knowledge(FIXTURE)
        self.graph = init_general_graph(["Steps taken", "Sleep efficiency"], self.knowledge)

    def test_merge_into_existing_node(self):
        incoming = MetricRecord(name="steps", value_kind=ValueKind.NUMERIC, dataset="tracker",
                                sensor_info="Counted by a wrist-worn accelerometer.")
        report = integrate_metric(self.graph, incoming, self.knowledge)
        self.assertEqual(report.merged, [("steps", "steps_taken")])
        self.assertEqual(report.created, [])
        self.assertEqual(len(report.graph.nodes), 2)
        node = report.graph.nodes["steps_taken"]
        self.assertEqual(node.sensor_info, ("Counted by a wrist-worn accelerometer.",))
        self.assertTrue(node.is_numeric)
        self.assertEqual(node.metric_key, "steps")
        # the input graph is left as it was
        self.assertIsNone(self.graph.nodes["steps_taken"].data_source)

    def test_new_metric_joins_every_node(self):
        incoming = MetricRecord(name="Mental stress", value_kind=ValueKind.NUMERIC, category=NodeCategory.MENTAL)
        report = integrate_metric(self.graph, incoming, self.knowledge)
        self.assertEqual(report.created, ["mental_stress"])
        self.assertEqual(report.new_edges, 2)
        self.assertEqual(len(report.graph.nodes), 3)
        self.assertEqual(report.graph.edge("mental_stress", "sleep_efficiency").prior_weight, 0.7)
        self.assertEqual(report.graph.edge("mental_stress", "steps_taken").prior_weight, 0.5)

    def test_needs_value_kind(self):
        with self.assertRaises(ValueError):
            integrate_metric(self.graph, MetricRecord(name="Mood"), self.knowledge)

    def test_store_commits(self):
        store = GraphStore(self.graph)
        store.integrate(MetricRecord(name="Anxiety", value_kind=ValueKind.NUMERIC), self.knowledge)
        self.assertIn("anxiety", store.graph.nodes)
        self.assertNotIn("anxiety", self.graph.nodes)

    def test_failed_provider_leaves_graph(self):
        knowledge = MagicMock()
        knowledge.node_gen.side_effect = RuntimeError("timeout")
        store = GraphStore(self.graph)
        with self.assertRaises(ProviderError):
            store.integrate(MetricRecord(name="Anxiety", value_kind=ValueKind.NUMERIC), knowledge)
        self.assertIs(store.graph, self.graph)


class TestNeighborhood(unittest.TestCase):
    def test_sorted_by_name(self):
        graph = init_general_graph(["Mood", "Anxiety", "Steps taken"], stub_knowledge())
        names = [node.name for node, _ in neighborhood(graph, "mood")]
        self.assertEqual(names, ["Anxiety", "Steps taken"])

    def test_unknown_node(self):
        graph = init_general_graph(["Mood"], stub_knowledge())
        with self.assertRaises(NodeNotFoundError):
            neighborhood(graph, "missing")


class TestPersistence(unittest.TestCase):
    def setUp(self):
        self.test_dir = tempfile.mkdtemp()
        self.path = os.path.join(self.test_dir, "graph.json")

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_round_trip_52_nodes(self):
        records = [
            MetricRecord(name=f"Metric {i:02d}", value_kind=ValueKind.NUMERIC if i % 2 else None,
                         description=f"Synthetic metric number {i}.", range="0-1" if i % 3 == 0 else None)
            for i in range(52)
        ]
        graph = init_general_graph(records, stub_knowledge(), StubEmbeddings())
        save_graph(graph, self.path)
        loaded = load_graph(self.path)
        self.assertEqual(len(loaded.nodes), 52)
        self.assertEqual(loaded, graph)
        self.assertEqual(loaded.nodes["metric_07"].name_embedding, graph.nodes["metric_07"].name_embedding)

    def test_document_is_sorted(self):
        graph = init_general_graph(["Mood", "Anxiety"], stub_knowledge())
        doc = graph_to_document(graph)
        self.assertEqual([n["id"] for n in doc["nodes"]], ["anxiety", "mood"])
        self.assertEqual(doc["edges"][0]["endpoints"], ["anxiety", "mood"])

    def test_schema_version_mismatch(self):
        doc = graph_to_document(init_general_graph(["Mood"], stub_knowledge()))
        doc["schema_version"] = 2
        with self.assertRaises(SchemaVersionError):
            graph_from_document(doc)

    def test_malformed_json(self):
        with open(self.path, "w", encoding="utf-8") as f:
            f.write("{not json")
        with self.assertRaises(GraphSchemaError):
            load_graph(self.path)

    def test_invalid_utf8(self):
        with open(self.path, "wb") as f:
            f.write(b"\xff\xfe{")
        with self.assertRaises(GraphSchemaError) as context:
            load_graph(self.path)
        self.assertEqual(context.exception.path, "$")
        self.assertIn("not valid UTF-8", str(context.exception))

    def test_edge_to_unknown_node(self):
        doc = graph_to_document(init_general_graph(["Mood", "Anxiety"], stub_knowledge()))
        doc["edges"][0]["endpoints"] = ["anxiety", "zzz"]
        with self.assertRaises(GraphSchemaError) as context:
            graph_from_document(doc)
        self.assertEqual(context.exception.path, "$.edges[0].endpoints")

    def test_unsorted_endpoints(self):
        doc = graph_to_document(init_general_graph(["Mood", "Anxiety"], stub_knowledge()))
        doc["edges"][0]["endpoints"] = ["mood", "anxiety"]
        with self.assertRaises(GraphSchemaError):
            graph_from_document(doc)

    def test_missing_field(self):
        with open(self.path, "w", encoding="utf-8") as f:
            json.dump({"schema_version": 1, "nodes": []}, f)
        with self.assertRaises(GraphSchemaError) as context:
            load_graph(self.path)
        self.assertEqual(context.exception.path, "$.edges")

if __name__ == "__main__":
    unittest.main()
