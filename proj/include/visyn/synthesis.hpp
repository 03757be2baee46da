#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "visyn/blend.hpp"
#include "visyn/codec.hpp"
#include "visyn/common.hpp"
#include "visyn/face_model.hpp"
#include "visyn/mesh.hpp"
#include "visyn/mrf.hpp"
#include "visyn/sample_db.hpp"
#include "visyn/viseme.hpp"

namespace visyn {

struct SynthesisConfig {
    double transition_weight = 1.0;  // weight of the junction term
    enum class Solver { kExactChain, kAlphaExpansion };
    Solver solver = Solver::kExactChain;
    int blend_radius = 5;     // frames on each side of a junction step
    double fps = 25.0;        // output timing metadata
    double seam_factor = 1.5;  // tolerated jump relative to within-sample motion
    double anchor_weight = 1.0;
    int max_sweeps = 10;
};

struct SelectionResult {
    std::vector<std::uint32_t> ids;
    double energy = 0.0;             // of the returned selection
    double unary_energy = 0.0;
    double transition_energy = 0.0;  // unweighted sum of junction costs
    double exact_energy = 0.0;       // chain optimum, always computed
};

namespace detail {

struct ChainSetup {
    ChainProblem problem;
    std::vector<std::vector<std::uint32_t>> ids;  // candidate ids per position
};

inline ChainSetup build_selection_chain(const std::vector<ExtendedLabel>& query,
                                        const SampleDatabase& db, const TransitionTable& table,
                                        const SynthesisConfig& config) {
    ChainSetup setup;
    setup.problem.unary.resize(query.size());
    setup.ids.resize(query.size());
    for (std::size_t i = 0; i < query.size(); ++i) {
        CandidateSet cs = candidates(query[i], db);
        setup.ids[i] = cs.ids;
        setup.problem.unary[i].assign(cs.ids.size(), cs.unary);
    }
    setup.problem.pairwise.resize(query.size() > 0 ? query.size() - 1 : 0);
    for (std::size_t i = 0; i + 1 < query.size(); ++i) {
        const auto& from = setup.ids[i];
        const auto& to = setup.ids[i + 1];
        setup.problem.pairwise[i].resize(from.size() * to.size());
        for (std::size_t a = 0; a < from.size(); ++a)
            for (std::size_t b = 0; b < to.size(); ++b)
                setup.problem.pairwise[i][a * to.size() + b] =
                    config.transition_weight * table.at(from[a], to[b]).cost;
    }
    return setup;
}

}  // namespace detail

// Chooses one sample per query position minimizing unary label mismatch plus
// weighted junction costs. The exact chain optimum is always computed; the
// expansion solver, when selected, is reported against it.
inline SelectionResult select_samples(const std::vector<ExtendedLabel>& query,
                                      const SampleDatabase& db, const TransitionTable& table,
                                      const SynthesisConfig& config) {
    if (query.empty()) throw Error("select_samples: empty query");
    detail::ChainSetup setup = detail::build_selection_chain(query, db, table, config);
    ChainResult exact = chain_solve(setup.problem);

    std::vector<int> pick = exact.pick;
    double energy = exact.energy;
    if (config.solver == SynthesisConfig::Solver::kAlphaExpansion) {
        MultiLabelProblem mrf = chain_as_mrf(setup.problem);
        ExpansionResult approx = alpha_expand(mrf, argmin_unary_labeling(mrf), config.max_sweeps);
        pick = approx.labeling;
        energy = approx.energy;
    }

    SelectionResult result;
    result.exact_energy = exact.energy;
    result.energy = energy;
    for (std::size_t i = 0; i < query.size(); ++i) {
        result.ids.push_back(setup.ids[i][std::size_t(pick[i])]);
        result.unary_energy += setup.problem.unary[i][std::size_t(pick[i])];
    }
    for (std::size_t i = 0; i + 1 < query.size(); ++i)
        result.transition_energy += table.at(result.ids[i], result.ids[i + 1]).cost;
    return result;
}

struct Concatenation {
    LatentSeq seq;
    std::vector<int> junctions;  // output index of each later sample's first frame
    std::vector<std::pair<int, int>> kept;  // per sample: first and last source frame
    std::vector<std::string> warnings;
};

// Splices the chosen samples at their precomputed junction alignments: each
// sample is truncated at its stored tail offset and the next one starts at
// its stored head offset.
inline Concatenation concatenate(const std::vector<const MotionSample*>& samples,
                                 const TransitionTable& table) {
    if (samples.empty()) throw Error("concatenate: no samples");
    int n = int(samples.size());
    Concatenation out;
    out.kept.assign(std::size_t(n), {0, 0});
    for (int i = 0; i < n; ++i) out.kept[std::size_t(i)] = {0, samples[std::size_t(i)]->seq.frames() - 1};
    for (int i = 0; i + 1 < n; ++i) {
        const Transition& tr = table.at(samples[std::size_t(i)]->id, samples[std::size_t(i) + 1]->id);
        out.kept[std::size_t(i)].second = tr.tail;
        out.kept[std::size_t(i) + 1].first = tr.head;
    }
    for (int i = 0; i < n; ++i) {
        auto& [first, last] = out.kept[std::size_t(i)];
        if (last < first) {
            out.warnings.push_back("sample " + std::to_string(samples[std::size_t(i)]->id) +
                                   " over-trimmed; keeping one frame");
            last = first = std::min(first, samples[std::size_t(i)]->seq.frames() - 1);
        }
    }
    out.seq.dim = samples[0]->seq.dim;
    for (int i = 0; i < n; ++i) {
        if (samples[std::size_t(i)]->seq.dim != out.seq.dim)
            throw Error("concatenate: latent dimension mismatch");
        if (i > 0) out.junctions.push_back(out.seq.frames());
        const auto& [first, last] = out.kept[std::size_t(i)];
        const LatentSeq& s = samples[std::size_t(i)]->seq;
        out.seq.data.insert(out.seq.data.end(), s.frame(first),
                            s.frame(first) + std::size_t(last - first + 1) * s.dim);
    }
    return out;
}

struct SynthesisResult {
    SelectionResult selection;
    std::vector<ExtendedLabel> query;
    std::vector<int> junctions;
    LatentSeq raw;      // spliced, unblended
    LatentSeq latents;  // after junction blending
    double max_junction_jump = 0.0;   // largest consecutive latent step overall
    double max_within_jump = 0.0;     // largest step inside any chosen sample
    bool seamless = true;
    std::vector<std::string> warnings;
    std::vector<MouthFrame> decoded;  // present when a codec was supplied
};

// Full query-to-animation path: selection, splicing, gradient-domain blending
// at the junctions, optional frame-by-frame decoding.
inline SynthesisResult synthesize(const std::vector<ExtendedLabel>& query, const SampleDatabase& db,
                                  const TransitionTable& table, const CodecModel* codec,
                                  const SynthesisConfig& config) {
    if (query.empty()) throw Error("synthesize: empty query");
    if (codec && codec->latent_dim != db.dim)
        throw Error("synthesize: codec latent dimension " + std::to_string(codec->latent_dim) +
                    " does not match the database dimension " + std::to_string(db.dim));
    SynthesisResult result;
    result.query = query;
    try {
        result.selection = select_samples(query, db, table, config);
    } catch (const Error& e) {
        throw InfeasibleError(std::string("selection: ") + e.what());
    }
    std::vector<const MotionSample*> chosen;
    for (std::uint32_t id : result.selection.ids) chosen.push_back(&db.by_id(id));
    Concatenation concat = concatenate(chosen, table);
    result.junctions = concat.junctions;
    result.raw = concat.seq;
    result.warnings = concat.warnings;
    result.latents = result.raw;
    result.latents.data =
        blend_sequence_1d(result.raw.data, result.raw.dim, result.junctions, config.blend_radius);

    auto step_norm = [](const LatentSeq& s, int f) {
        double acc = 0.0;
        for (int k = 0; k < s.dim; ++k) {
            double d = s.frame(f + 1)[k] - s.frame(f)[k];
            acc += d * d;
        }
        return std::sqrt(acc);
    };
    for (const MotionSample* s : chosen)
        for (int f = 0; f + 1 < s->seq.frames(); ++f)
            result.max_within_jump = std::max(result.max_within_jump, step_norm(s->seq, f));
    for (int f = 0; f + 1 < result.latents.frames(); ++f)
        result.max_junction_jump = std::max(result.max_junction_jump, step_norm(result.latents, f));
    result.seamless =
        result.max_junction_jump <= config.seam_factor * result.max_within_jump + 1e-12;
    if (!result.seamless)
        result.warnings.push_back("junction jump " + std::to_string(result.max_junction_jump) +
                                  " exceeds " + std::to_string(config.seam_factor) +
                                  "x the within-sample motion");

    if (codec) {
        result.decoded.reserve(std::size_t(result.latents.frames()));
        for (int f = 0; f < result.latents.frames(); ++f) {
            Eigen::Map<const Eigen::VectorXd> z(result.latents.frame(f), codec->latent_dim);
            result.decoded.push_back(decode(*codec, z));
        }
    }
    return result;
}

struct CompositeFrame {
    Image atlas;
    std::vector<double> vertices;
};

// Integrates one decoded mouth frame into the full head: the texture ROI is
// pasted with a gradient-domain solve against the base atlas ring, and the
// ROI vertices are merged through the Laplacian blend anchored at the ROI
// boundary ring. Texels and vertices outside the ROI are returned untouched.
inline CompositeFrame composite_frame(const MouthFrame& decoded, const Image& base_atlas,
                                      const ShapeModel& model, const PoseShapeParams& base_params,
                                      const MouthRoi& roi, const SynthesisConfig& config) {
    const RoiSpec& rect = roi.rect;
    if (decoded.texture.width != rect.width || decoded.texture.height != rect.height)
        throw Error("composite_frame: decoded raster does not match the ROI");
    if (rect.x < 0 || rect.y < 0 || rect.x + rect.width > base_atlas.width ||
        rect.y + rect.height > base_atlas.height)
        throw Error("composite_frame: ROI outside the base atlas");
    if (decoded.geometry.size() != model.basis.cols())
        throw Error("composite_frame: decoded weights do not match the model");

    CompositeFrame out;

    // texture: guidance from the decoded ROI inside the rectangle, base
    // gradients across its border, base values as the Dirichlet ring
    std::vector<std::uint8_t> mask(std::size_t(base_atlas.width) * base_atlas.height, 0);
    for (int y = rect.y; y < rect.y + rect.height; ++y)
        for (int x = rect.x; x < rect.x + rect.width; ++x)
            mask[std::size_t(y) * base_atlas.width + x] = 1;
    GradientField g = gradient_of(base_atlas);
    for (int y = 0; y < rect.height; ++y)
        for (int x = 0; x < rect.width; ++x)
            for (int c = 0; c < 3; ++c) {
                if (x + 1 < rect.width)
                    g.gx.at(rect.x + x, rect.y + y, c) =
                        decoded.texture.at(x + 1, y, c) - decoded.texture.at(x, y, c);
                if (y + 1 < rect.height)
                    g.gy.at(rect.x + x, rect.y + y, c) =
                        decoded.texture.at(x, y + 1, c) - decoded.texture.at(x, y, c);
            }
    out.atlas = poisson_blend_2d(base_atlas, mask, g, base_atlas, 1e-10, 20000);

    // geometry: deform with the decoded weights, merge the ROI vertex set
    std::vector<double> base_verts = deform(model, base_params);
    PoseShapeParams decoded_params = base_params;
    decoded_params.b = decoded.geometry;
    std::vector<double> replacement = deform(model, decoded_params);
    auto adjacency = vertex_adjacency(model.mesh);
    std::vector<bool> in_roi(adjacency.size(), false);
    for (int v : roi.vertices) in_roi[std::size_t(v)] = true;
    std::vector<int> anchors;
    for (int v : roi.vertices)
        for (int u : adjacency[std::size_t(v)])
            if (!in_roi[std::size_t(u)]) {
                anchors.push_back(v);
                break;
            }
    out.vertices = laplacian_mesh_integrate(base_verts, replacement, roi.vertices, anchors,
                                            config.anchor_weight, adjacency);
    return out;
}

// --- synthesis manifest ------------------------------------------------------------

inline nlohmann::json synthesis_manifest(const SynthesisResult& result, double fps) {
    nlohmann::json j;
    std::vector<std::string> labels;
    for (const auto& l : result.query) labels.push_back(l.str());
    j["query"] = labels;
    j["ids"] = result.selection.ids;
    j["junctions"] = result.junctions;
    j["frames"] = result.latents.frames();
    j["fps"] = fps;
    j["energy"] = result.selection.energy;
    j["exact_energy"] = result.selection.exact_energy;
    j["unary_energy"] = result.selection.unary_energy;
    j["transition_energy"] = result.selection.transition_energy;
    j["max_junction_jump"] = result.max_junction_jump;
    j["max_within_jump"] = result.max_within_jump;
    j["seamless"] = result.seamless;
    j["warnings"] = result.warnings;
    return j;
}

}  // namespace visyn
