#include "mmfuse/selection.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mmfuse/io.hpp"

namespace mmfuse::selection {

std::size_t ApplicationMatrix::active_count() const {
    std::size_t s = 0;
    for (auto c : cells) s += c != 0;
    return s;
}

void ApplicationMatrix::validate() const {
    if (modalities.empty() || models.empty())
        throw std::invalid_argument("application matrix: no modalities or models");
    if (cells.size() != modalities.size() * models.size())
        throw std::invalid_argument("application matrix: cell count != m*n");
    if (active_count() < 2)
        throw std::invalid_argument("application matrix: needs at least 2 active cells");
}

std::string CandidateSet::label(const ApplicationMatrix& theta) const {
    std::string out;
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (i) out += "+";
        out += theta.modalities[members[i].modality] + ":" + theta.models[members[i].model];
    }
    return out;
}

void FoldData::validate(const ApplicationMatrix& theta) const {
    for (const auto& [cell, pm] : predictions) {
        if (cell.first >= theta.modalities.size() || cell.second >= theta.models.size())
            throw std::invalid_argument("fold " + fold_id + ": prediction for unknown cell");
        if (pm.size() != labels.size())
            throw std::invalid_argument("fold " + fold_id + ": prediction row count mismatch");
    }
    if (predictions.size() > 1) {
        const auto& ref = predictions.begin()->second.instance_ids;
        for (const auto& [cell, pm] : predictions)
            if (pm.instance_ids != ref)
                throw std::invalid_argument("fold " + fold_id +
                                            ": misaligned instance ids across models");
    }
}

std::vector<CandidateSet> enumerate_candidates(const ApplicationMatrix& theta,
                                               std::size_t max_size) {
    theta.validate();
    std::vector<MemberRef> active;
    for (std::size_t i = 0; i < theta.modalities.size(); ++i)
        for (std::size_t j = 0; j < theta.models.size(); ++j)
            if (theta.active(i, j)) active.push_back({i, j});
    const std::size_t s = active.size();
    const std::size_t cap = max_size == 0 ? s : std::min(s, max_size);

    std::vector<CandidateSet> out;
    // size-h combinations in lexicographic order over the active-cell list
    for (std::size_t h = 2; h <= cap; ++h) {
        std::vector<std::size_t> pick(h);
        for (std::size_t i = 0; i < h; ++i) pick[i] = i;
        for (;;) {
            CandidateSet cand;
            for (std::size_t i : pick) cand.members.push_back(active[i]);
            out.push_back(std::move(cand));
            // advance the combination
            std::size_t i = h;
            while (i > 0 && pick[i - 1] == s - h + i - 1) --i;
            if (i == 0) break;
            ++pick[i - 1];
            for (std::size_t j = i; j < h; ++j) pick[j] = pick[j - 1] + 1;
        }
    }
    return out;
}

int majority_vote(const std::vector<int>& crisp_labels, const std::vector<Vec>* soft_scores) {
    if (crisp_labels.size() < 2) throw std::invalid_argument("majority_vote: needs >= 2 models");
    std::map<int, std::size_t> counts;
    for (int c : crisp_labels) ++counts[c];
    std::size_t top = 0;
    for (const auto& [label, count] : counts) top = std::max(top, count);
    std::vector<int> modes;
    for (const auto& [label, count] : counts)
        if (count == top) modes.push_back(label);
    if (modes.size() == 1) return modes.front();

    if (soft_scores != nullptr) {
        // tie among modes: the tied class with the greatest summed soft score
        double best_sum = -1.0;
        int best_label = modes.front();
        for (int label : modes) {
            double sum = 0.0;
            for (const Vec& y : *soft_scores) {
                if (label < 0 || static_cast<std::size_t>(label) >= y.size())
                    throw std::invalid_argument("majority_vote: label outside score range");
                sum += y[static_cast<std::size_t>(label)];
            }
            if (sum > best_sum) {  // strict: equal sums keep the lower label
                best_sum = sum;
                best_label = label;
            }
        }
        return best_label;
    }
    return modes.front();  // lowest class index (map order)
}

namespace {

const tabular::PredictionMatrix& member_predictions(const CandidateSet& candidate,
                                                    const FoldData& fold, std::size_t idx) {
    auto it = fold.predictions.find({candidate.members[idx].modality, candidate.members[idx].model});
    if (it == fold.predictions.end())
        throw std::invalid_argument("fold " + fold.fold_id + ": missing prediction matrix for member " +
                                    std::to_string(candidate.members[idx].modality) + ":" +
                                    std::to_string(candidate.members[idx].model));
    return it->second;
}

std::vector<std::uint8_t> correctness_vector(const tabular::PredictionMatrix& pm,
                                             const std::vector<int>& labels) {
    std::vector<std::uint8_t> v(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        v[i] = pm.crisp_labels[i] == labels[i] ? 1 : 0;
    return v;
}

}  // namespace

double eval_accuracy(const CandidateSet& candidate, const FoldData& fold) {
    if (candidate.size() < 2) throw std::invalid_argument("eval_accuracy: needs >= 2 members");
    std::vector<const tabular::PredictionMatrix*> mats;
    for (std::size_t m = 0; m < candidate.size(); ++m)
        mats.push_back(&member_predictions(candidate, fold, m));
    for (const auto* pm : mats)
        if (pm->instance_ids != mats[0]->instance_ids)
            throw std::invalid_argument("eval_accuracy: misaligned instance ids");
    const std::size_t n = fold.labels.size();
    if (n == 0) return 0.0;
    std::size_t hits = 0;
    std::vector<int> crisp(candidate.size());
    std::vector<Vec> soft(candidate.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t m = 0; m < candidate.size(); ++m) {
            crisp[m] = mats[m]->crisp_labels[i];
            soft[m] = mats[m]->scores.row(i);
        }
        if (majority_vote(crisp, &soft) == fold.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

double pairwise_rho(const std::vector<std::uint8_t>& u, const std::vector<std::uint8_t>& v) {
    if (u.size() != v.size()) throw std::invalid_argument("pairwise_rho: length mismatch");
    if (u.empty()) throw std::invalid_argument("pairwise_rho: empty vectors");
    double n11 = 0, n00 = 0, n10 = 0, n01 = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] && v[i])
            ++n11;
        else if (!u[i] && !v[i])
            ++n00;
        else if (u[i] && !v[i])
            ++n10;
        else
            ++n01;
    }
    const double denom =
        std::sqrt((n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00));
    if (denom == 0.0) return u == v ? 1.0 : 0.0;
    return (n11 * n00 - n01 * n10) / denom;
}

double diversity(const CandidateSet& candidate, const FoldData& fold) {
    if (candidate.size() < 2) throw std::invalid_argument("diversity: needs >= 2 members");
    std::vector<std::vector<std::uint8_t>> correct;
    for (std::size_t m = 0; m < candidate.size(); ++m)
        correct.push_back(correctness_vector(member_predictions(candidate, fold, m), fold.labels));
    double sum = 0.0;
    const std::size_t g = candidate.size();
    for (std::size_t i = 0; i + 1 < g; ++i)
        for (std::size_t j = i + 1; j < g; ++j) sum += pairwise_rho(correct[i], correct[j]);
    const double rho_bar = 2.0 * sum / (static_cast<double>(g) * static_cast<double>(g - 1));
    return (1.0 - rho_bar) / 2.0;
}

std::vector<ScoredCandidate> score_candidates(const std::vector<CandidateSet>& candidates,
                                              const std::vector<FoldData>& folds) {
    if (folds.empty()) throw std::invalid_argument("score_candidates: no folds");
    std::vector<ScoredCandidate> out(candidates.size());
    std::exception_ptr failure;
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(dynamic) if (n > 8)
    for (std::ptrdiff_t idx = 0; idx < n; ++idx) {
        try {
            ScoredCandidate sc;
            sc.candidate = candidates[static_cast<std::size_t>(idx)];
            for (const auto& fold : folds) {
                sc.per_fold_eval.push_back(eval_accuracy(sc.candidate, fold));
                sc.per_fold_div.push_back(diversity(sc.candidate, fold));
            }
            double esum = 0.0, dsum = 0.0;
            for (double e : sc.per_fold_eval) esum += e;
            for (double d : sc.per_fold_div) dsum += d;
            sc.eval_score = esum / static_cast<double>(folds.size());
            sc.div_score = dsum / static_cast<double>(folds.size());
            out[static_cast<std::size_t>(idx)] = std::move(sc);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

namespace {

// Non-strict dominance under maximization: >= on both and > on at least one.
bool dominates(const ScoredCandidate& a, const ScoredCandidate& b) {
    return a.eval_score >= b.eval_score && a.div_score >= b.div_score &&
           (a.eval_score > b.eval_score || a.div_score > b.div_score);
}

}  // namespace

std::vector<std::size_t> pareto_front(const std::vector<ScoredCandidate>& points) {
    if (points.empty()) throw std::invalid_argument("pareto_front: empty input");
    std::vector<std::size_t> front;
    for (std::size_t i = 0; i < points.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < points.size() && !dominated; ++j)
            if (j != i && dominates(points[j], points[i])) dominated = true;
        if (!dominated) front.push_back(i);
    }
    return front;
}

double ideal_distance_objective(const ScoredCandidate& p) {
    const double de = p.eval_score - 1.0;
    const double dd = p.div_score - 1.0;
    return de * de + dd * dd;
}

std::size_t select_gamma_star(const std::vector<ScoredCandidate>& points,
                              const std::vector<std::size_t>& front) {
    if (front.empty()) throw std::invalid_argument("select_gamma_star: empty front");
    std::size_t best = front.front();
    for (std::size_t idx : front) {
        const double obj = ideal_distance_objective(points[idx]);
        const double best_obj = ideal_distance_objective(points[best]);
        if (obj < best_obj) {
            best = idx;
        } else if (obj == best_obj && idx != best) {
            const auto& a = points[idx].candidate;
            const auto& b = points[best].candidate;
            if (a.size() < b.size() || (a.size() == b.size() && a.members < b.members)) best = idx;
        }
    }
    return best;
}

SelectionResult run_selection(const ApplicationMatrix& theta, const std::vector<FoldData>& folds,
                              std::size_t max_size) {
    for (const auto& fold : folds) fold.validate(theta);
    SelectionResult result;
    auto candidates = enumerate_candidates(theta, max_size);
    result.scored = score_candidates(candidates, folds);
    result.front = pareto_front(result.scored);
    result.gamma_star = select_gamma_star(result.scored, result.front);
    return result;
}

std::string selection_csv(const ApplicationMatrix& theta, const SelectionResult& result) {
    std::ostringstream out;
    out << "candidate,size,eval,div,objective,on_front,gamma_star,fold_evals,fold_divs\n";
    std::vector<bool> on_front(result.scored.size(), false);
    for (std::size_t idx : result.front) on_front[idx] = true;
    for (std::size_t i = 0; i < result.scored.size(); ++i) {
        const auto& sc = result.scored[i];
        out << sc.candidate.label(theta) << "," << sc.candidate.size() << ","
            << io::format_double(sc.eval_score) << "," << io::format_double(sc.div_score) << ","
            << io::format_double(ideal_distance_objective(sc)) << "," << (on_front[i] ? 1 : 0)
            << "," << (i == result.gamma_star ? 1 : 0) << ",";
        for (std::size_t f = 0; f < sc.per_fold_eval.size(); ++f) {
            if (f) out << ";";
            out << io::format_double(sc.per_fold_eval[f]);
        }
        out << ",";
        for (std::size_t f = 0; f < sc.per_fold_div.size(); ++f) {
            if (f) out << ";";
            out << io::format_double(sc.per_fold_div[f]);
        }
        out << "\n";
    }
    return out.str();
}

std::string selection_summary_json(const ApplicationMatrix& theta, const SelectionResult& result) {
    auto candidate_json = [&](const ScoredCandidate& sc) {
        std::ostringstream o;
        o << "{\"members\":[";
        for (std::size_t i = 0; i < sc.candidate.members.size(); ++i) {
            const auto& m = sc.candidate.members[i];
            if (i) o << ",";
            o << "\"" << theta.modalities[m.modality] << ":" << theta.models[m.model] << "\"";
        }
        o << "],\"eval\":" << io::format_double(sc.eval_score)
          << ",\"div\":" << io::format_double(sc.div_score)
          << ",\"objective\":" << io::format_double(ideal_distance_objective(sc)) << "}";
        return o.str();
    };
    std::ostringstream out;
    out << "{\"n_candidates\":" << result.scored.size() << ",\"gamma_star\":"
        << candidate_json(result.scored[result.gamma_star]) << ",\"front\":[";
    for (std::size_t i = 0; i < result.front.size(); ++i) {
        if (i) out << ",";
        out << candidate_json(result.scored[result.front[i]]);
    }
    out << "]}";
    return out.str();
}

}  // namespace mmfuse::selection
