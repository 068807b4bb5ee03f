#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmfuse/matrix.hpp"
#include "mmfuse/tabular.hpp"

namespace mmfuse::selection {

/// Binary m x n matrix marking which model runs on which modality.
struct ApplicationMatrix {
    std::vector<std::string> modalities;  // m
    std::vector<std::string> models;      // n
    std::vector<std::uint8_t> cells;      // m x n row-major, 1 = active

    bool active(std::size_t i, std::size_t j) const { return cells[i * models.size() + j] != 0; }
    std::size_t active_count() const;
    void validate() const;
};

struct MemberRef {
    std::size_t modality = 0;
    std::size_t model = 0;
    auto operator<=>(const MemberRef&) const = default;
};

/// A set of (modality, model) pairs considered for fusion. Members are kept
/// sorted so candidate identity and ordering are canonical.
struct CandidateSet {
    std::vector<MemberRef> members;

    std::size_t size() const { return members.size(); }
    std::string label(const ApplicationMatrix& theta) const;
    auto operator<=>(const CandidateSet&) const = default;
};

struct ScoredCandidate {
    CandidateSet candidate;
    double eval_score = 0.0;
    double div_score = 0.0;
    Vec per_fold_eval;
    Vec per_fold_div;
};

/// All prediction matrices of one validation fold, aligned on the same
/// instance order, keyed by (modality index, model index).
struct FoldData {
    std::string fold_id;
    std::vector<int> labels;
    std::map<std::pair<std::size_t, std::size_t>, tabular::PredictionMatrix> predictions;

    void validate(const ApplicationMatrix& theta) const;
};

/// Every subset of active cells with 2 <= size <= min(s, max_size), ordered
/// by size then lexicographically. max_size 0 means uncapped; the uncapped
/// count is 2^s - s - 1.
std::vector<CandidateSet> enumerate_candidates(const ApplicationMatrix& theta,
                                               std::size_t max_size = 0);

/// Mode of the crisp labels. Ties among modes go to the tied class with the
/// greatest summed soft score; absent scores (or a score tie) fall back to
/// the lowest class index.
int majority_vote(const std::vector<int>& crisp_labels, const std::vector<Vec>* soft_scores);

/// Fraction of fold instances where the members' majority vote hits the
/// true label.
double eval_accuracy(const CandidateSet& candidate, const FoldData& fold);

/// Correlation between two binary correctness vectors (1 = correct).
/// A zero denominator yields 1 for identical vectors and 0 otherwise.
double pairwise_rho(const std::vector<std::uint8_t>& u, const std::vector<std::uint8_t>& v);

/// div = (1 - rho_bar) / 2 where rho_bar averages pairwise_rho over all
/// member pairs; lies in [0, 1], higher means more diverse.
double diversity(const CandidateSet& candidate, const FoldData& fold);

/// Per-fold eval/div for every candidate, averaged across folds. Candidates
/// are scored independently (parallel across candidates when the kernel
/// thread count allows) and returned in the input order.
std::vector<ScoredCandidate> score_candidates(const std::vector<CandidateSet>& candidates,
                                              const std::vector<FoldData>& folds);

/// Indices of all points not dominated under maximization of
/// (eval_score, div_score). Duplicates are all retained.
std::vector<std::size_t> pareto_front(const std::vector<ScoredCandidate>& points);

double ideal_distance_objective(const ScoredCandidate& p);

/// Front point minimizing (eval-1)^2 + (div-1)^2; ties break toward the
/// smaller candidate, then lexicographic member order.
std::size_t select_gamma_star(const std::vector<ScoredCandidate>& points,
                              const std::vector<std::size_t>& front);

struct SelectionResult {
    std::vector<ScoredCandidate> scored;     // canonical enumeration order
    std::vector<std::size_t> front;          // indices into scored
    std::size_t gamma_star = 0;              // index into scored
};

SelectionResult run_selection(const ApplicationMatrix& theta, const std::vector<FoldData>& folds,
                              std::size_t max_size = 0);

/// Delimited report: one row per candidate with per-fold and averaged
/// scores, front membership and the selection objective.
std::string selection_csv(const ApplicationMatrix& theta, const SelectionResult& result);
/// Machine-readable summary of the front and the chosen candidate.
std::string selection_summary_json(const ApplicationMatrix& theta, const SelectionResult& result);

}  // namespace mmfuse::selection
