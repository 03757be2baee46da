#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "visyn/common.hpp"
#include "visyn/sample_db.hpp"

using namespace visyn;

namespace {

MotionSample make_sample(std::uint32_t id, const std::string& label, int frames, int dim,
                         std::uint64_t seed) {
    Rng rng(seed);
    MotionSample s;
    s.id = id;
    s.label = parse_extended_label(label);
    s.seq.dim = dim;
    s.seq.data.resize(std::size_t(frames) * dim);
    for (auto& v : s.seq.data) v = rng.uniform(-1, 1);
    return s;
}

MotionSample constant_sample(std::uint32_t id, const std::string& label, int frames, int dim,
                             double value) {
    MotionSample s;
    s.id = id;
    s.label = parse_extended_label(label);
    s.seq.dim = dim;
    s.seq.data.assign(std::size_t(frames) * dim, value);
    return s;
}

}  // namespace

TEST_CASE("transition_cost: a sample splices onto itself for free") {
    // short enough that the alignment windows can coincide: zero cost exactly
    // at tail + 1 == head, content regardless
    MotionSample a = make_sample(0, "ALT", 8, 3, 99);
    Transition t = transition_cost(a, a, 4, 3);
    REQUIRE(t.cost == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(t.tail + 1 == t.head);
}

TEST_CASE("transition_cost: constant samples have the closed-form cost everywhere") {
    int dim = 5;
    MotionSample a = constant_sample(0, "ALT", 10, dim, 0.25);
    MotionSample b = constant_sample(1, "LT#", 10, dim, -0.35);
    double per_dim = (0.25 + 0.35) * (0.25 + 0.35);
    Transition t = transition_cost(a, b, 4, 3);
    // mean over window and dims of a constant squared difference
    REQUIRE(t.cost == Catch::Approx(per_dim));
    // ties broken to the smallest (tail, head)
    REQUIRE(t.tail == 10 - 3 - 4);
    REQUIRE(t.head == 0);
}

TEST_CASE("transition_cost: matches exhaustive alignment enumeration") {
    Rng rng(512);
    for (int trial = 0; trial < 30; ++trial) {
        int dim = rng.uniform_int(1, 6);
        MotionSample a = make_sample(0, "ALT", 10, dim, rng.next_u64());
        MotionSample b = make_sample(1, "LT#", 10, dim, rng.next_u64());
        int W = 4, K = 3;
        Transition got = transition_cost(a, b, W, K);

        // oracle: enumerate every feasible (tail, head)
        double best = 1e300;
        int best_tail = -1, best_head = -1;
        for (int tail = 0; tail + W <= 9; ++tail) {
            if (tail + W < 10 - K) continue;  // window end within the last K frames
            for (int head = 0; head + W - 1 <= 9 && head <= K - 1; ++head) {
                double acc = 0;
                for (int f = 0; f < W; ++f)
                    for (int k = 0; k < dim; ++k) {
                        double d = a.seq.frame(tail + 1 + f)[k] - b.seq.frame(head + f)[k];
                        acc += d * d;
                    }
                acc /= double(W) * dim;
                if (acc < best - 1e-15) {
                    best = acc;
                    best_tail = tail;
                    best_head = head;
                }
            }
        }
        INFO("trial " << trial);
        REQUIRE(got.cost == Catch::Approx(best));
        REQUIRE(got.tail == best_tail);
        REQUIRE(got.head == best_head);
    }
}

TEST_CASE("transition_cost: dimension mismatch rejected") {
    MotionSample a = make_sample(0, "ALT", 8, 3, 1);
    MotionSample b = make_sample(1, "ALT", 8, 4, 2);
    REQUIRE_THROWS_AS(transition_cost(a, b, 4), Error);
}

TEST_CASE("build_transition_table: one sample gives one self-pair") {
    SampleDatabase db;
    db.dim = 3;
    db.samples.push_back(make_sample(0, "#A#", 8, 3, 5));
    TransitionTable t = build_transition_table(db);
    REQUIRE(t.entries.size() == 1);
    REQUIRE(t.at(0, 0).cost >= 0.0);
}

TEST_CASE("build_transition_table: nine entries equal the pairwise calls") {
    SampleDatabase db;
    db.dim = 4;
    db.samples.push_back(make_sample(0, "#A#", 9, 4, 11));
    db.samples.push_back(make_sample(1, "#P#", 10, 4, 12));
    db.samples.push_back(make_sample(2, "#T#", 11, 4, 13));
    TransitionTable t = build_transition_table(db, 4, 3);
    REQUIRE(t.entries.size() == 9);
    for (const auto& a : db.samples)
        for (const auto& b : db.samples) {
            Transition direct = transition_cost(a, b, 4, 3);
            const Transition& stored = t.at(a.id, b.id);
            REQUIRE(stored.cost == Catch::Approx(direct.cost));
            REQUIRE(stored.tail == direct.tail);
            REQUIRE(stored.head == direct.head);
        }
}

TEST_CASE("build_transition_table: permuting the database relabels but does not change entries") {
    SampleDatabase db;
    db.dim = 3;
    db.samples.push_back(make_sample(7, "#A#", 8, 3, 21));
    db.samples.push_back(make_sample(3, "#P#", 9, 3, 22));
    db.samples.push_back(make_sample(5, "#T#", 10, 3, 23));
    TransitionTable t1 = build_transition_table(db);
    SampleDatabase shuffled;
    shuffled.dim = 3;
    shuffled.samples = {db.samples[2], db.samples[0], db.samples[1]};
    TransitionTable t2 = build_transition_table(shuffled);
    for (const auto& a : db.samples)
        for (const auto& b : db.samples) {
            REQUIRE(t1.at(a.id, b.id).cost == Catch::Approx(t2.at(a.id, b.id).cost));
            REQUIRE(t1.at(a.id, b.id).tail == t2.at(a.id, b.id).tail);
            REQUIRE(t1.at(a.id, b.id).head == t2.at(a.id, b.id).head);
        }
}

TEST_CASE("build_transition_table: thread count does not change the table") {
    SampleDatabase db;
    db.dim = 6;
    for (std::uint32_t i = 0; i < 7; ++i)
        db.samples.push_back(make_sample(i, "#A#", 8 + int(i % 3), 6, 100 + i));
    TransitionTable serial = build_transition_table(db, 4, 3, 1);
    TransitionTable parallel = build_transition_table(db, 4, 3, 4);
    REQUIRE(serial.entries.size() == parallel.entries.size());
    for (std::size_t k = 0; k < serial.entries.size(); ++k) {
        REQUIRE(serial.entries[k].cost == parallel.entries[k].cost);
        REQUIRE(serial.entries[k].tail == parallel.entries[k].tail);
        REQUIRE(serial.entries[k].head == parallel.entries[k].head);
    }
}

TEST_CASE("candidates: exact match class with zero unary") {
    SampleDatabase db;
    db.dim = 2;
    db.samples.push_back(make_sample(0, "ALT", 8, 2, 1));
    db.samples.push_back(make_sample(1, "-AL", 8, 2, 2));
    db.samples.push_back(make_sample(2, "ALT", 8, 2, 3));
    CandidateSet c = candidates(parse_extended_label("ALT"), db);
    REQUIRE(c.ids == std::vector<std::uint32_t>{0, 2});
    REQUIRE(c.score == 2);
    REQUIRE(c.unary == 0.0);
}

TEST_CASE("candidates: best partial context class") {
    SampleDatabase db;
    db.dim = 2;
    db.samples.push_back(make_sample(0, "-LT", 8, 2, 1));
    db.samples.push_back(make_sample(1, "#L#", 8, 2, 2));
    CandidateSet c = candidates(parse_extended_label("ALT"), db);
    REQUIRE(c.ids == std::vector<std::uint32_t>{0});  // matches next, score 1
    REQUIRE(c.score == 1);
    REQUIRE(c.unary == 1.0);
}

TEST_CASE("candidates: missing current viseme is unsatisfiable") {
    SampleDatabase db;
    db.dim = 2;
    db.samples.push_back(make_sample(0, "ALT", 8, 2, 1));
    try {
        candidates(parse_extended_label("#S#"), db);
        FAIL("expected an error");
    } catch (const InfeasibleError& e) {
        REQUIRE(std::string(e.what()).find("\"S\"") != std::string::npos);
    }
}

TEST_CASE("build_sample_db: annotated spans become samples") {
    LatentSeq take(3, 30);
    Rng rng(5);
    for (auto& v : take.data) v = rng.uniform(-1, 1);
    std::vector<Annotation> ann{{parse_extended_label("#-A"), 2, 8},
                                {parse_extended_label("-AL"), 5, 11}};
    SampleDatabase db = build_sample_db({{"take0", take}}, {ann});
    REQUIRE(db.samples.size() == 2);
    REQUIRE(db.dim == 3);
    REQUIRE(db.samples[0].seq.frames() == 7);
    REQUIRE(db.samples[1].seq.frames() == 7);
    for (int f = 0; f < 7; ++f)
        for (int k = 0; k < 3; ++k)
            REQUIRE(db.samples[1].seq.frame(f)[k] == take.frame(5 + f)[k]);

    std::vector<Annotation> bad{{parse_extended_label("#A#"), 25, 31}};
    REQUIRE_THROWS_AS(build_sample_db({{"take0", take}}, {bad}), Error);
}

TEST_CASE("sample database file round trip") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "visyn_test_vsdb";
    fs::create_directories(dir);
    SampleDatabase db;
    db.dim = 5;
    db.samples.push_back(make_sample(0, "#-A", 8, 5, 31));
    db.samples.push_back(make_sample(4, "-AL", 12, 5, 32));
    std::string path = (dir / "db.vsdb").string();
    save_sample_db(path, db);
    SampleDatabase loaded = load_sample_db(path);
    REQUIRE(loaded.dim == 5);
    REQUIRE(loaded.samples.size() == 2);
    REQUIRE(loaded.samples[1].id == 4);
    REQUIRE(loaded.samples[1].label.str() == "-AL");
    REQUIRE(loaded.samples[1].seq.frames() == 12);
    for (int f = 0; f < 12; ++f)
        for (int k = 0; k < 5; ++k)
            REQUIRE(loaded.samples[1].seq.frame(f)[k] ==
                    Catch::Approx(db.samples[1].seq.frame(f)[k]).margin(1e-6));
    fs::remove_all(dir);
}

TEST_CASE("transition table file round trip") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "visyn_test_vstt";
    fs::create_directories(dir);
    SampleDatabase db;
    db.dim = 3;
    db.samples.push_back(make_sample(2, "#A#", 8, 3, 41));
    db.samples.push_back(make_sample(9, "#P#", 9, 3, 42));
    TransitionTable t = build_transition_table(db);
    std::string path = (dir / "table.vstt").string();
    save_transition_table(path, t);
    TransitionTable loaded = load_transition_table(path);
    REQUIRE(loaded.ids == t.ids);
    for (const auto& a : db.samples)
        for (const auto& b : db.samples) {
            REQUIRE(loaded.at(a.id, b.id).cost == Catch::Approx(t.at(a.id, b.id).cost).margin(1e-6));
            REQUIRE(loaded.at(a.id, b.id).tail == t.at(a.id, b.id).tail);
            REQUIRE(loaded.at(a.id, b.id).head == t.at(a.id, b.id).head);
        }
    fs::remove_all(dir);
}

TEST_CASE("annotations json round trip") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "visyn_test_ann";
    fs::create_directories(dir);
    std::vector<Annotation> ann{{parse_extended_label("#-A"), 3, 9},
                                {parse_extended_label("-AL"), 6, 12}};
    std::string path = (dir / "ann.json").string();
    save_annotations_json(path, ann);
    auto loaded = load_annotations_json(path);
    REQUIRE(loaded.size() == 2);
    REQUIRE(loaded[0].label.str() == "#-A");
    REQUIRE(loaded[0].start == 3);
    REQUIRE(loaded[1].end == 12);
    fs::remove_all(dir);
}
