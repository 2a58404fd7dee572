import random
import tempfile
import unittest
from datetime import datetime, timezone
from pathlib import Path

from src.config import ConfigError, CorpusError, GraphModeError, MatrixTooLargeError
from src.corpus import TweetRecord
from src.mention_miner import mine
from src.netbuild import (
    BuildConfig,
    MentionGraph,
    build_graph,
    filter_edges,
    read_edges_csv,
    select_endpoints,
    to_adjacency,
    write_edges_csv,
)
from src.synthgen import CommunitySpec, PlantedSpec, RingSpec, plant

_TS = datetime(2020, 3, 8, tzinfo=timezone.utc)


def _tweets(*pairs):
    return [TweetRecord(id=str(i), author=a, text=t, created_at=_TS) for i, (a, t) in enumerate(pairs)]


def _named_edges(graph):
    return {(graph.handle(u), graph.handle(v), w) for u, v, w in graph.edges()}


def _recount(events, sources, targets, include_self_loops=False):
    src, tgt = set(sources), set(targets)
    counts = {}
    for a, t in events:
        if a in src and t in tgt and (include_self_loops or a != t):
            counts[(a, t)] = counts.get((a, t), 0) + 1
    return counts


def _random_graph(rng, n=40, p=0.15, max_weight=300):
    edges = [(u, v, rng.randint(1, max_weight))
             for u in range(n) for v in range(n) if u != v and rng.random() < p]
    return MentionGraph.from_edges(edges, nodes=range(n))


class TestBuildGraph(unittest.TestCase):
    def setUp(self):
        self.mined = mine(_tweets(("ana", "@bea @bea"), ("bea", "@ana")))

    def test_weighted_example(self):
        graph = build_graph(self.mined, BuildConfig(n1=10, n2=10))
        self.assertEqual(_named_edges(graph), {("ana", "bea", 2), ("bea", "ana", 1)})

    def test_unweighted_example(self):
        graph = build_graph(self.mined, BuildConfig(n1=10, n2=10, weighted=False))
        self.assertEqual(_named_edges(graph), {("ana", "bea", 1), ("bea", "ana", 1)})
        self.assertFalse(graph.weighted)

    def test_isolated_selected_nodes_kept(self):
        mined = mine(_tweets(("ana", "@bea"), ("luis", "sin menciones")))
        graph = build_graph(mined, BuildConfig(n1=10, n2=10))
        self.assertEqual(graph.number_of_nodes(), 3)
        self.assertEqual(graph.number_of_edges(), 1)
        self.assertEqual(graph.role_counts(), {"source": 2, "target": 1, "both": 0})

    def test_self_loops_excluded_by_default(self):
        mined = mine(_tweets(("ana", "@ana @bea")))
        self.assertEqual(_named_edges(build_graph(mined, BuildConfig(n1=5, n2=5))), {("ana", "bea", 1)})
        with_loops = build_graph(mined, BuildConfig(n1=5, n2=5, include_self_loops=True))
        self.assertEqual(_named_edges(with_loops), {("ana", "ana", 1), ("ana", "bea", 1)})

    def test_empty_corpus(self):
        graph = build_graph(mine([]), BuildConfig())
        self.assertEqual((graph.number_of_nodes(), graph.number_of_edges()), (0, 0))

    def test_invalid_config(self):
        with self.assertRaises(ConfigError):
            BuildConfig(n1=0)
        with self.assertRaises(ConfigError):
            BuildConfig(n2_rank="followers")

    def test_n2_rank_by_posts(self):
        # carla is mentioned most but never posts
        mined = mine(_tweets(("ana", "@carla @bea"), ("ana", "@carla"), ("bea", "@ana")))
        by_mentions = build_graph(mined, BuildConfig(n1=2, n2=1))
        by_posts = build_graph(mined, BuildConfig(n1=2, n2=1, n2_rank="posts"))
        self.assertEqual(_named_edges(by_mentions), {("ana", "carla", 2)})
        self.assertEqual(_named_edges(by_posts), {("bea", "ana", 1)})

    def test_matches_brute_force_recount(self):
        for seed in range(50):
            spec = PlantedSpec(
                n_users=300, n_tweets=2000, mention_rate=1.3, seed=seed,
                communities=[CommunitySpec(40, 0.6)], rings=[RingSpec(5, 10)],
            )
            mined = mine(plant(spec).records)
            config = BuildConfig(n1=60, n2=40)
            graph = build_graph(mined, config)
            sources, targets = select_endpoints(mined, config)
            expected = _recount(
                zip(mined.authors.tolist(), mined.targets.tolist()), sources, targets)
            self.assertEqual({(u, v): w for u, v, w in graph.edges()}, expected, f"seed {seed}")
            self.assertEqual(graph.total_weight(), sum(expected.values()))

    def test_ten_thousand_tweets_conservation(self):
        mined = mine(plant(PlantedSpec(n_users=1000, n_tweets=10000, seed=5)).records)
        config = BuildConfig(n1=2000, n2=200)
        graph = build_graph(mined, config)
        sources, targets = select_endpoints(mined, config)
        expected = _recount(zip(mined.authors.tolist(), mined.targets.tolist()), sources, targets)
        self.assertEqual(graph.total_weight(), sum(expected.values()))

    def test_deterministic_and_unweighted_edge_set(self):
        mined = mine(plant(PlantedSpec(n_users=200, n_tweets=1500, seed=2)).records)
        a = build_graph(mined, BuildConfig(n1=50, n2=30))
        b = build_graph(mined, BuildConfig(n1=50, n2=30))
        u = build_graph(mined, BuildConfig(n1=50, n2=30, weighted=False))
        self.assertEqual(a.edges(), b.edges())
        self.assertEqual([(s, d) for s, d, _ in a.edges()], [(s, d) for s, d, _ in u.edges()])
        self.assertTrue(all(w == 1 for _, _, w in u.edges()))
        self.assertTrue(all(w >= 1 for _, _, w in a.edges()))


class TestFilterEdges(unittest.TestCase):
    def test_strict_threshold(self):
        graph = MentionGraph.from_edges([(0, 1, 5), (2, 3, 200), (4, 5, 201)])
        kept = filter_edges(graph, 200)
        self.assertEqual(kept.edges(), [(4, 5, 201)])
        self.assertEqual(kept.nodes(), [4, 5])

    def test_zero_threshold_unchanged(self):
        graph = MentionGraph.from_edges([(0, 1, 1), (1, 2, 7), (3, 0, 2)])
        kept = filter_edges(graph, 0)
        self.assertEqual(kept.edges(), graph.edges())
        self.assertEqual(kept.nodes(), graph.nodes())

    def test_isolated_nodes_dropped(self):
        graph = MentionGraph.from_edges([(0, 1, 5), (1, 2, 9)], nodes=range(4))
        self.assertEqual(filter_edges(graph, 0).nodes(), [0, 1, 2])
        self.assertEqual(filter_edges(graph, 5).nodes(), [1, 2])

    def test_threshold_above_every_weight_gives_empty_graph(self):
        graph = MentionGraph.from_edges([(0, 1, 5)], nodes=range(4))
        kept = filter_edges(graph, 10 ** 6)
        self.assertEqual((kept.number_of_nodes(), kept.number_of_edges()), (0, 0))

    def test_kept_nodes_are_edge_endpoints(self):
        rng = random.Random(3)
        for _ in range(20):
            graph = _random_graph(rng, p=0.05)
            kept = filter_edges(graph, rng.randint(0, 300))
            self.assertEqual(set(kept.nodes()), {x for u, v, _ in kept.edges() for x in (u, v)})

    def test_input_not_mutated(self):
        graph = MentionGraph.from_edges([(0, 1, 1), (1, 2, 7)])
        filter_edges(graph, 5)
        self.assertEqual(graph.number_of_edges(), 2)

    def test_unweighted_rejected(self):
        graph = MentionGraph.from_edges([(0, 1, 1)], weighted=False)
        with self.assertRaises(GraphModeError):
            filter_edges(graph, 1)

    def test_composition_and_monotonicity(self):
        rng = random.Random(11)
        for _ in range(100):
            graph = _random_graph(rng)
            a, b = rng.randint(0, 300), rng.randint(0, 300)
            twice = filter_edges(filter_edges(graph, a), b)
            direct = filter_edges(graph, max(a, b))
            self.assertEqual(twice.edges(), direct.edges())
            self.assertEqual(twice.nodes(), direct.nodes())
            lo, hi = filter_edges(graph, min(a, b)), filter_edges(graph, max(a, b))
            self.assertTrue(set(hi.edges()) <= set(lo.edges()))
            self.assertEqual(filter_edges(hi, max(a, b)).edges(), hi.edges())


class TestAdjacency(unittest.TestCase):
    def test_two_nodes(self):
        graph = MentionGraph.from_edges([(0, 1, 3)], handles={0: "a", 1: "b"})
        adj = to_adjacency(graph, "by_id")
        self.assertEqual(adj.matrix.tolist(), [[0, 3], [0, 0]])
        self.assertEqual(adj.handles, ["a", "b"])
        self.assertEqual(adj.index, {0: 0, 1: 1})

    def test_empty(self):
        adj = to_adjacency(MentionGraph.from_edges([]))
        self.assertEqual(adj.matrix.shape, (0, 0))

    def test_row_sums_are_out_strengths(self):
        graph = _random_graph(random.Random(4), n=50)
        for ordering in ("by_id", "by_out_strength"):
            adj = to_adjacency(graph, ordering)
            for uid, row_sum in zip(adj.order, adj.matrix.sum(axis=1).tolist()):
                self.assertEqual(row_sum, graph.out_strength(uid))

    def test_out_strength_ordering(self):
        graph = MentionGraph.from_edges([(0, 1, 1), (2, 1, 9), (1, 0, 4)])
        self.assertEqual(to_adjacency(graph, "by_out_strength").order, [2, 1, 0])

    def test_by_community_needs_assignment(self):
        graph = MentionGraph.from_edges([(0, 1, 1)])
        with self.assertRaises(ConfigError):
            to_adjacency(graph, "by_community")

    def test_cap(self):
        graph = MentionGraph.from_edges([(0, 1, 3), (1, 2, 1)])
        with self.assertRaises(MatrixTooLargeError):
            to_adjacency(graph, cap=2)


class TestEdgeFiles(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_write_sorted_by_handle(self):
        graph = MentionGraph.from_edges([(0, 1, 2), (1, 0, 1), (0, 2, 4)],
                                        handles={0: "zoe", 1: "ana", 2: "bea"})
        path = self.dir / "edges.csv"
        write_edges_csv(graph, path)
        self.assertEqual(path.read_text(encoding="utf-8"),
                         "src,dst,weight\nana,zoe,1\nzoe,ana,2\nzoe,bea,4\n")

    def test_read_edges(self):
        path = self.dir / "edges.csv"
        path.write_text("src,dst,weight\nbea,ana,1\nAna,bea,2\n", encoding="utf-8")
        graph = read_edges_csv(path)
        self.assertEqual(_named_edges(graph), {("ana", "bea", 2), ("bea", "ana", 1)})
        self.assertEqual(graph.handle(0), "ana")

    def test_read_rejects_bad_rows(self):
        for body in ("a,b\nx,y\n", "src,dst,weight\nana,bea,0\n", "src,dst,weight\nana,bea,lots\n"):
            path = self.dir / "bad.csv"
            path.write_text(body, encoding="utf-8")
            with self.assertRaises(CorpusError, msg=body):
                read_edges_csv(path)

    def test_read_missing_file(self):
        with self.assertRaises(CorpusError):
            read_edges_csv(self.dir / "nope.csv")


if __name__ == '__main__':
    unittest.main()
