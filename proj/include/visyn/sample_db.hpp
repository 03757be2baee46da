#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "visyn/common.hpp"
#include "visyn/io.hpp"
#include "visyn/viseme.hpp"

namespace visyn {

// Sequence of latent frames, row-major frames x dim.
struct LatentSeq {
    int dim = 0;
    std::vector<double> data;

    LatentSeq() = default;
    LatentSeq(int d, int frames) : dim(d), data(std::size_t(d) * frames, 0.0) {}

    int frames() const { return dim > 0 ? int(data.size() / std::size_t(dim)) : 0; }
    double* frame(int f) { return data.data() + std::size_t(f) * dim; }
    const double* frame(int f) const { return data.data() + std::size_t(f) * dim; }

    LatentSeq slice(int first, int last) const {  // inclusive range
        if (first < 0 || last >= frames() || last < first) throw Error("LatentSeq: bad slice");
        LatentSeq out;
        out.dim = dim;
        out.data.assign(frame(first), frame(first) + std::size_t(last - first + 1) * dim);
        return out;
    }
};

// --- latent sequence file ("VSLS") ---------------------------------------------

inline void save_latent_seq(const std::string& path, const LatentSeq& seq) {
    BinaryWriter w(path);
    w.magic("VSLS");
    w.u32(1);
    w.u32(std::uint32_t(seq.dim));
    w.u32(std::uint32_t(seq.frames()));
    w.f32_array(seq.data.data(), seq.data.size());
    w.close();
}

inline LatentSeq load_latent_seq(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic("VSLS");
    std::uint32_t version = r.u32();
    if (version != 1) r.fail("unsupported version " + std::to_string(version));
    LatentSeq seq;
    seq.dim = int(r.u32());
    std::uint32_t frames = r.u32();
    if (seq.dim <= 0 || seq.dim > 1 << 20) r.fail("implausible latent dimension");
    seq.data.resize(std::size_t(seq.dim) * frames);
    r.f32_array(seq.data.data(), seq.data.size());
    return seq;
}

// --- samples and the database ----------------------------------------------------

struct MotionSample {
    std::uint32_t id = 0;
    ExtendedLabel label;
    LatentSeq seq;
    // provenance, kept in memory only
    std::string take;
    int source_start = 0;
};

struct SampleDatabase {
    int dim = 0;
    std::vector<MotionSample> samples;

    const MotionSample& by_id(std::uint32_t id) const {
        for (const auto& s : samples)
            if (s.id == id) return s;
        throw Error("sample id " + std::to_string(id) + " not in the database");
    }

    void validate() const {
        for (const auto& s : samples) {
            if (s.seq.dim != dim) throw Error("sample " + std::to_string(s.id) + ": dimension mismatch");
            if (s.seq.frames() < 2)
                throw Error("sample " + std::to_string(s.id) + ": needs at least 2 frames");
            if (s.label.cur == kEmptyViseme)
                throw Error("sample " + std::to_string(s.id) + ": empty current viseme");
        }
    }
};

// --- annotations: JSON per take [{"label","start","end"}] -----------------------

struct Annotation {
    ExtendedLabel label;
    int start = 0, end = 0;  // inclusive frames
};

inline void save_annotations_json(const std::string& path, const std::vector<Annotation>& annotations) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& a : annotations)
        j.push_back({{"label", a.label.str()}, {"start", a.start}, {"end", a.end}});
    write_text_file(path, j.dump(2) + "\n");
}

inline std::vector<Annotation> load_annotations_json(const std::string& path) {
    nlohmann::json j = nlohmann::json::parse(read_text_file(path), nullptr, true, true);
    if (!j.is_array()) throw FormatError(path + ": annotations must be a JSON array");
    std::vector<Annotation> out;
    for (const auto& item : j) {
        Annotation a;
        a.label = parse_extended_label(item.at("label").get<std::string>());
        a.start = item.at("start").get<int>();
        a.end = item.at("end").get<int>();
        if (a.end < a.start) throw FormatError(path + ": annotation with end before start");
        out.push_back(a);
    }
    return out;
}

// Cuts annotated spans out of per-take latent sequences. Sample ids are
// assigned in take order, then annotation order.
inline SampleDatabase build_sample_db(
    const std::vector<std::pair<std::string, LatentSeq>>& takes,
    const std::vector<std::vector<Annotation>>& annotations_per_take) {
    if (takes.size() != annotations_per_take.size())
        throw Error("build_sample_db: takes and annotations differ in count");
    SampleDatabase db;
    std::uint32_t next_id = 0;
    for (std::size_t t = 0; t < takes.size(); ++t) {
        const LatentSeq& seq = takes[t].second;
        if (db.dim == 0) db.dim = seq.dim;
        if (seq.dim != db.dim) throw Error("build_sample_db: takes disagree on the latent dimension");
        for (const auto& a : annotations_per_take[t]) {
            if (a.start < 0 || a.end >= seq.frames())
                throw Error("build_sample_db: annotation [" + std::to_string(a.start) + ", " +
                            std::to_string(a.end) + "] outside take \"" + takes[t].first + "\"");
            MotionSample s;
            s.id = next_id++;
            s.label = a.label;
            s.seq = seq.slice(a.start, a.end);
            s.take = takes[t].first;
            s.source_start = a.start;
            db.samples.push_back(std::move(s));
        }
    }
    db.validate();
    return db;
}

// --- sample database file ("VSDB") -----------------------------------------------

inline void save_sample_db(const std::string& path, const SampleDatabase& db) {
    BinaryWriter w(path);
    w.magic("VSDB");
    w.u32(1);
    w.u32(std::uint32_t(db.dim));
    w.u32(std::uint32_t(db.samples.size()));
    for (const auto& s : db.samples) {
        w.u32(s.id);
        w.str(s.label.prev);
        w.str(s.label.cur);
        w.str(s.label.next);
        w.u32(std::uint32_t(s.seq.frames()));
        w.f32_array(s.seq.data.data(), s.seq.data.size());
    }
    w.close();
}

inline SampleDatabase load_sample_db(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic("VSDB");
    std::uint32_t version = r.u32();
    if (version != 1) r.fail("unsupported version " + std::to_string(version));
    SampleDatabase db;
    db.dim = int(r.u32());
    if (db.dim <= 0 || db.dim > 1 << 20) r.fail("implausible latent dimension");
    std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        MotionSample s;
        s.id = r.u32();
        s.label.prev = r.str(16);
        s.label.cur = r.str(16);
        s.label.next = r.str(16);
        std::uint32_t frames = r.u32();
        if (frames < 2) r.fail("sample " + std::to_string(s.id) + " has fewer than 2 frames");
        s.seq.dim = db.dim;
        s.seq.data.resize(std::size_t(db.dim) * frames);
        r.f32_array(s.seq.data.data(), s.seq.data.size());
        db.samples.push_back(std::move(s));
    }
    db.validate();
    return db;
}

// --- transitions -----------------------------------------------------------------

inline constexpr int kDefaultTransitionWindow = 4;  // MSE window, frames
inline constexpr int kDefaultSearchRange = 3;       // candidate offsets per side

struct Transition {
    double cost = 0.0;
    int tail = 0;  // last frame of `a` kept by the splice
    int head = 0;  // first frame of `b` kept by the splice
};

// Optimal junction between samples a (outgoing) and b (incoming). The window
// compares the `window` frames of a right AFTER the kept tail with the first
// `window` kept frames of b, so zero cost means b continues exactly where a
// was cut and the splice a[0..tail] ++ b[head..] is seamless. The window end
// in a ranges over its last `search_range` frames, the head of b over its
// first `search_range`. Ties resolve to the smallest (tail, head).
inline Transition transition_cost(const MotionSample& a, const MotionSample& b, int window,
                                  int search_range = kDefaultSearchRange) {
    if (a.seq.dim != b.seq.dim) throw Error("transition_cost: latent dimension mismatch");
    int d = a.seq.dim;
    int A = a.seq.frames(), B = b.seq.frames();
    int w = std::max(1, std::min({window, A - 1, B}));
    int tail_lo = std::max(0, A - search_range - w);
    int tail_hi = std::max(tail_lo, A - 1 - w);
    int head_hi = std::min(search_range - 1, B - w);
    if (head_hi < 0) head_hi = 0;

    Transition best;
    best.cost = -1.0;
    for (int tail = tail_lo; tail <= tail_hi; ++tail)
        for (int head = 0; head <= head_hi; ++head) {
            double acc = 0.0;
            for (int f = 0; f < w; ++f) {
                const double* fa = a.seq.frame(tail + 1 + f);
                const double* fb = b.seq.frame(head + f);
                for (int k = 0; k < d; ++k) {
                    double diff = fa[k] - fb[k];
                    acc += diff * diff;
                }
            }
            acc /= double(w) * double(d);
            if (best.cost < 0.0 || acc < best.cost) best = {acc, tail, head};
        }
    return best;
}

struct TransitionTable {
    int window = kDefaultTransitionWindow;
    int search_range = kDefaultSearchRange;
    std::vector<std::uint32_t> ids;  // row/column order
    std::vector<Transition> entries;  // ids.size()^2, row-major (from, to)

    const Transition& at(std::uint32_t from_id, std::uint32_t to_id) const {
        int i = index_of(from_id), j = index_of(to_id);
        return entries[std::size_t(i) * ids.size() + j];
    }

    int index_of(std::uint32_t id) const {
        auto it = std::find(ids.begin(), ids.end(), id);
        if (it == ids.end())
            throw Error("transition table has no entry for sample " + std::to_string(id));
        return int(it - ids.begin());
    }
};

// All ordered pairs, including self-pairs. Entry (i, j) only depends on the
// two samples, so the table is independent of database order up to the id
// relabeling, and pair computation parallelizes freely.
inline TransitionTable build_transition_table(const SampleDatabase& db,
                                              int window = kDefaultTransitionWindow,
                                              int search_range = kDefaultSearchRange,
                                              int threads = 1) {
    if (db.samples.empty()) throw Error("build_transition_table: empty database");
    TransitionTable table;
    table.window = window;
    table.search_range = search_range;
    for (const auto& s : db.samples) table.ids.push_back(s.id);
    std::size_t n = db.samples.size();
    table.entries.resize(n * n);
    parallel_for(n * n, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t k = lo; k < hi; ++k) {
            const MotionSample& a = db.samples[k / n];
            const MotionSample& b = db.samples[k % n];
            try {
                table.entries[k] = transition_cost(a, b, window, search_range);
            } catch (const Error& e) {
                throw Error("pair (" + std::to_string(a.id) + ", " + std::to_string(b.id) +
                            "): " + e.what());
            }
        }
    });
    return table;
}

// --- transition table file ("VSTT") ----------------------------------------------

inline void save_transition_table(const std::string& path, const TransitionTable& table) {
    BinaryWriter w(path);
    w.magic("VSTT");
    w.u32(1);
    w.u32(std::uint32_t(table.entries.size()));
    std::size_t n = table.ids.size();
    for (std::size_t k = 0; k < table.entries.size(); ++k) {
        const Transition& t = table.entries[k];
        if (t.tail < 0 || t.tail > 0xffff || t.head < 0 || t.head > 0xffff)
            throw Error("save_transition_table: offset does not fit u16");
        w.u32(table.ids[k / n]);
        w.u32(table.ids[k % n]);
        w.f32(float(t.cost));
        w.u16(std::uint16_t(t.tail));
        w.u16(std::uint16_t(t.head));
    }
    w.close();
}

inline TransitionTable load_transition_table(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic("VSTT");
    std::uint32_t version = r.u32();
    if (version != 1) r.fail("unsupported version " + std::to_string(version));
    std::uint32_t count = r.u32();
    std::size_t n = std::size_t(std::llround(std::sqrt(double(count))));
    if (n * n != count) r.fail("pair count " + std::to_string(count) + " is not a full table");
    TransitionTable table;
    table.entries.resize(count);
    table.ids.assign(n, 0);
    for (std::uint32_t k = 0; k < count; ++k) {
        std::uint32_t from = r.u32();
        std::uint32_t to = r.u32();
        Transition t;
        t.cost = double(r.f32());
        t.tail = int(r.u16());
        t.head = int(r.u16());
        std::size_t row = k / n, col = k % n;
        if (row == 0)
            table.ids[col] = to;  // the first row fixes the sample order
        else if (table.ids[col] != to)
            r.fail("table columns out of order");
        if (table.ids[row] != from) r.fail("table rows disagree with the column order");
        table.entries[std::size_t(row) * n + col] = t;
    }
    return table;
}

// --- candidate selection -----------------------------------------------------------

struct CandidateSet {
    std::vector<std::uint32_t> ids;  // ascending
    int score = 0;                   // matched context entries, 0..2
    double unary = 2.0;              // 2 - score
};

// All samples of the best matching class for a query label: the current
// viseme must match; the class score counts matching prev/next context.
inline CandidateSet candidates(const ExtendedLabel& query, const SampleDatabase& db) {
    CandidateSet out;
    int best = -1;
    for (const auto& s : db.samples) {
        if (s.label.cur != query.cur) continue;
        int score = int(s.label.prev == query.prev) + int(s.label.next == query.next);
        if (score > best) {
            best = score;
            out.ids.clear();
        }
        if (score == best) out.ids.push_back(s.id);
    }
    if (best < 0)
        throw InfeasibleError("no sample with current viseme \"" + query.cur + "\" in the database");
    std::sort(out.ids.begin(), out.ids.end());
    out.score = best;
    out.unary = 2.0 - best;
    return out;
}

}  // namespace visyn
