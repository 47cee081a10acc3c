#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "causalmine/scm/infer.hpp"
#include "causalmine/scm/types.hpp"
#include "causalmine/util/rng.hpp"

namespace causalmine::adapt {

struct AdaptError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyBatch : AdaptError {
    using AdaptError::AdaptError;
};
struct EmptyBelief : AdaptError {
    using AdaptError::AdaptError;
};

// One structural edit applied by a proposal rule; kept on the hypothesis so
// edits can be reported, counted (Occam tie-break), and undone.
struct EditDescriptor {
    std::string id;    // canonical "kind(params...)" string, unique per edit
    std::string kind;  // add_gated_exogenous | adjust_gaussian | adjust_linear_weight
    std::string target;
    std::string gate;
    std::string added_exo;
    bool gate_added = false;
    double mean = 0.0;
    double variance = 0.0;
    double delta = 0.0;
    int weight_index = -1;

    bool operator==(const EditDescriptor&) const = default;
};

struct ModelHypothesis {
    scm::Scm model;
    double log_weight = 0.0;  // log P(M | D_0..t)
    std::vector<EditDescriptor> provenance;
};

struct ModelBelief {
    std::vector<ModelHypothesis> hypotheses;
    std::size_t capacity = 8;  // N: max hypotheses kept after a step
    std::size_t t = 0;         // batch counter
    bool warning_all_impossible = false;

    // Initial belief: exactly the predefined model with weight 1.
    static ModelBelief initial(scm::Scm base, std::size_t capacity);

    void normalize();
    double weight_sum() const;
};

struct DataBatch {
    std::vector<scm::Assignment> records;  // observed endogenous variables
    std::size_t timestamp = 0;
};

struct ProposalRule {
    enum class Kind { AddGatedExogenous, AdjustGaussianParams, AdjustLinearWeight, RemoveAddedVariable };
    Kind kind = Kind::AddGatedExogenous;
    std::string target;  // endogenous (AddGated/AdjustLinear) or exogenous (AdjustGaussian)
    std::string gate;    // AddGated: endogenous gate variable
    double gate_threshold = 0.5;
    std::vector<double> mean_grid;
    std::vector<double> variance_grid;
    int weight_index = 0;
    std::vector<double> delta_grid;
    std::string edit_id;  // RemoveAddedVariable

    static ProposalRule add_gated(std::string target, std::string gate, std::vector<double> means,
                                  std::vector<double> variances, double threshold = 0.5);
    static ProposalRule adjust_gaussian(std::string exo, std::vector<double> means,
                                        std::vector<double> variances);
    static ProposalRule adjust_linear(std::string target, int weight_index, std::vector<double> deltas);
    static ProposalRule remove_added(std::string edit_id);
};

struct AdaptConfig {
    double new_hypothesis_mass = 0.01;  // epsilon: prior mass for each new hypothesis
    std::size_t max_new = 16;           // proposal budget per step
    std::size_t n_samples = 256;        // per-record likelihood samples on the MC path
    scm::InferConfig infer;
    int n_threads = 1;  // hypothesis likelihoods may be scored in parallel
};

// One edit away from an existing hypothesis, structural duplicates
// suppressed; new hypotheses carry log(epsilon) mass pending normalization.
std::vector<ModelHypothesis> gen_alt_scms(const ModelBelief& belief,
                                          const std::vector<ProposalRule>& rules, Rng& rng,
                                          std::size_t max_new, const AdaptConfig& cfg = {});

// One adaptation iteration: propose, score batch likelihood per hypothesis,
// update posterior in log space, keep the N most probable. When every
// hypothesis scores -inf the belief is returned unchanged with
// warning_all_impossible set.
ModelBelief adapt_step(const ModelBelief& belief, const DataBatch& batch,
                       const std::vector<ProposalRule>& rules, Rng& rng, const AdaptConfig& cfg = {});

const ModelHypothesis& map_hypothesis(const ModelBelief& belief);
const scm::Scm& map_model(const ModelBelief& belief);

nlohmann::json belief_to_json(const ModelBelief& belief);

}  // namespace causalmine::adapt
