#include "carrysim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace carrysim {

namespace {

constexpr double kBetaEps = 3e-15;
constexpr int kBetaMaxIter = 500;

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
    const double tiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kBetaMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kBetaEps) return h;
    }
    throw std::runtime_error("incomplete beta continued fraction did not converge");
}

// Adaptive Simpson with an absolute tolerance.
template <typename F>
double adaptive_simpson_step(const F& f, double a, double b, double fa, double fm, double fb,
                             double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0) throw std::runtime_error("quadrature recursion limit reached");
    if (std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double tol, int depth = 48) {
    const double fa = f(a);
    const double fm = f(0.5 * (a + b));
    const double fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson_step(f, a, b, fa, fm, fb, whole, tol, depth);
}

// log density of S = sqrt(chi2_nu / nu), the scale variable of the
// studentized range.
double log_chi_scale_density(double s, double nu) {
    return std::log(2.0) + 0.5 * nu * std::log(nu / 2.0) - std::lgamma(nu / 2.0) +
           (nu - 1.0) * std::log(s) - nu * s * s / 2.0;
}

double mean_of(const std::vector<double>& values) {
    double total = 0.0;
    for (double v : values) total += v;
    return total / static_cast<double>(values.size());
}

std::string stars_for(double p) {
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "";
}

}  // namespace

std::string PosthocResult::annotated_chain() const {
    if (groups.size() < 2) return chain;
    // The stars describe the weakest strict inequality between neighbours.
    double worst_p = -1.0;
    for (std::size_t i = 0; i + 1 < groups.size(); ++i) {
        for (const PairwiseComparison& pc : pairs) {
            if (pc.group_i == groups[i].label && pc.group_j == groups[i + 1].label &&
                pc.p_value < 0.05) {
                worst_p = std::max(worst_p, pc.p_value);
            }
        }
    }
    if (worst_p < 0.0) return chain;
    return chain + stars_for(worst_p);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_pdf(double x) {
    static const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * M_PI);
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double regularized_incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("beta parameters must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
    const double bt = std::exp(log_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return bt * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - bt * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_upper_tail(double f, double df1, double df2) {
    if (df1 <= 0.0 || df2 <= 0.0) throw std::invalid_argument("degrees of freedom must be positive");
    if (f <= 0.0) return 1.0;
    if (std::isinf(f)) return 0.0;
    return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f));
}

double normal_range_cdf(double r, int k) {
    if (k < 1) throw std::invalid_argument("range requires at least one variate");
    if (r <= 0.0) return 0.0;
    if (k == 1) return 1.0;
    // Anchor the integral at the sample maximum; the normal density bounds
    // the integrand, so fixed limits suffice for double precision.
    const auto integrand = [r, k](double u) {
        const double window = normal_cdf(u) - normal_cdf(u - r);
        return normal_pdf(u) * std::pow(window, k - 1);
    };
    const double value = k * adaptive_simpson(integrand, -8.5, 8.5, 1e-12);
    return std::clamp(value, 0.0, 1.0);
}

double studentized_range_cdf(double x, int k, double nu) {
    if (k < 2) throw std::invalid_argument("studentized range requires k >= 2");
    if (nu <= 0.0) throw std::invalid_argument("degrees of freedom must be positive");
    if (x <= 0.0) return 0.0;

    const auto outer = [x, k, nu](double s) {
        if (s <= 0.0) return 0.0;
        const double log_density = log_chi_scale_density(s, nu);
        if (log_density < -700.0) return 0.0;
        return std::exp(log_density) * normal_range_cdf(x * s, k);
    };

    // The scale density concentrates around 1 with spread ~1/sqrt(2 nu);
    // 20 of those spreads bound the tail mass below 1e-80 on either side.
    const double spread = 20.0 / std::sqrt(2.0 * nu);
    const double lo = std::max(0.0, 1.0 - spread);
    const double hi = 1.0 + spread;

    // Pre-split so the adaptive pass cannot overlook a narrow density spike.
    const int panels = 33;
    double total = 0.0;
    const double width = (hi - lo) / panels;
    for (int i = 0; i < panels; ++i) {
        total += adaptive_simpson(outer, lo + i * width, lo + (i + 1) * width, 1e-9 / panels);
    }
    if (!std::isfinite(total)) {
        throw std::runtime_error("studentized range quadrature failed: non-finite estimate");
    }
    return std::clamp(total, 0.0, 1.0);
}

std::vector<double> iqr_filter(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("iqr_filter: empty input");
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());

    const auto quartile = [&sorted](double q) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        if (lo + 1 >= sorted.size()) return sorted.back();
        return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
    };

    const double q1 = quartile(0.25);
    const double q3 = quartile(0.75);
    const double iqr = q3 - q1;
    const double lo = q1 - 1.5 * iqr;
    const double hi = q3 + 1.5 * iqr;

    std::vector<double> retained;
    retained.reserve(values.size());
    for (double v : values) {
        if (v >= lo && v <= hi) retained.push_back(v);
    }
    return retained;
}

GroupSummary summarize(const std::vector<double>& values, const std::string& label) {
    if (values.size() < 2) throw std::invalid_argument("summary requires at least two values");
    GroupSummary s;
    s.label = label;
    s.n = static_cast<long>(values.size());
    s.mean = mean_of(values);
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return s;
}

AnovaResult anova_from_summary(const std::vector<GroupSummary>& groups) {
    if (groups.size() < 2) throw std::invalid_argument("ANOVA requires at least two groups");
    long total_n = 0;
    double grand_total = 0.0;
    for (const GroupSummary& g : groups) {
        if (g.n < 2) throw std::invalid_argument("every group needs n >= 2");
        total_n += g.n;
        grand_total += g.mean * static_cast<double>(g.n);
    }
    const double grand_mean = grand_total / static_cast<double>(total_n);

    double ss_between = 0.0;
    double ss_within = 0.0;
    for (const GroupSummary& g : groups) {
        ss_between += static_cast<double>(g.n) * (g.mean - grand_mean) * (g.mean - grand_mean);
        ss_within += static_cast<double>(g.n - 1) * g.sd * g.sd;
    }

    AnovaResult r;
    r.df_between = static_cast<long>(groups.size()) - 1;
    r.df_within = total_n - static_cast<long>(groups.size());
    const double ms_between = ss_between / static_cast<double>(r.df_between);
    const double ms_within = ss_within / static_cast<double>(r.df_within);
    if (ms_within == 0.0) {
        // Degenerate data: identical constants give F = 0, separated
        // constants a perfect effect.
        r.f = ss_between == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        r.p_value = ss_between == 0.0 ? 1.0 : 0.0;
        r.eta_squared = ss_between == 0.0 ? 0.0 : 1.0;
        return r;
    }
    r.f = ms_between / ms_within;
    r.p_value = f_upper_tail(r.f, static_cast<double>(r.df_between),
                             static_cast<double>(r.df_within));
    r.eta_squared = ss_between / (ss_between + ss_within);
    return r;
}

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw std::invalid_argument("ANOVA requires at least two groups");
    std::vector<GroupSummary> summaries;
    summaries.reserve(groups.size());
    for (const auto& g : groups) summaries.push_back(summarize(g));
    return anova_from_summary(summaries);
}

PosthocResult games_howell_from_summary(const std::vector<GroupSummary>& groups) {
    const std::size_t k = groups.size();
    if (k < 2) throw std::invalid_argument("post hoc comparison requires at least two groups");
    for (const GroupSummary& g : groups) {
        if (g.n < 2) throw std::invalid_argument("every group needs n >= 2");
    }

    PosthocResult result;
    result.groups = groups;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const GroupSummary& a = groups[i];
            const GroupSummary& b = groups[j];
            PairwiseComparison pc;
            pc.group_i = a.label;
            pc.group_j = b.label;
            pc.mean_diff = b.mean - a.mean;

            const double var_a = a.sd * a.sd / static_cast<double>(a.n);
            const double var_b = b.sd * b.sd / static_cast<double>(b.n);
            const double se2 = var_a + var_b;
            if (se2 == 0.0) {
                pc.q_statistic = pc.mean_diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
                pc.welch_df = std::numeric_limits<double>::infinity();
                pc.p_value = pc.mean_diff == 0.0 ? 1.0 : 0.0;
                result.pairs.push_back(pc);
                continue;
            }
            pc.q_statistic = std::fabs(pc.mean_diff) / std::sqrt(se2 / 2.0);
            pc.welch_df = se2 * se2 /
                          (var_a * var_a / static_cast<double>(a.n - 1) +
                           var_b * var_b / static_cast<double>(b.n - 1));
            pc.p_value = pc.q_statistic == 0.0
                             ? 1.0
                             : 1.0 - studentized_range_cdf(pc.q_statistic, static_cast<int>(k),
                                                           pc.welch_df);
            result.pairs.push_back(pc);
        }
    }

    // Ordering chain over neighbours in the given group order.
    result.chain = groups.front().label;
    for (std::size_t i = 0; i + 1 < k; ++i) {
        const PairwiseComparison* pc = nullptr;
        for (const PairwiseComparison& candidate : result.pairs) {
            if (candidate.group_i == groups[i].label && candidate.group_j == groups[i + 1].label) {
                pc = &candidate;
                break;
            }
        }
        const char* relation = " = ";
        if (pc->p_value < 0.05) relation = pc->mean_diff > 0.0 ? " < " : " > ";
        result.chain += relation + groups[i + 1].label;
    }
    return result;
}

PosthocResult games_howell(const std::vector<std::vector<double>>& groups,
                           const std::vector<std::string>& labels) {
    if (!labels.empty() && labels.size() != groups.size()) {
        throw std::invalid_argument("label count does not match group count");
    }
    std::vector<GroupSummary> summaries;
    summaries.reserve(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i) {
        summaries.push_back(
            summarize(groups[i], labels.empty() ? std::to_string(i) : labels[i]));
    }
    return games_howell_from_summary(summaries);
}

HumanRtAnalysis human_rt_pipeline(const std::vector<RtRecord>& records) {
    // Cell = one participant's RTs for one carry class, correct answers only.
    std::map<std::pair<int, std::string>, std::vector<double>> cells;
    std::set<std::pair<int, std::string>> seen;
    for (const RtRecord& r : records) {
        if (r.rt_seconds <= 0.0) throw std::invalid_argument("response times must be positive");
        seen.insert({r.carry_class, r.participant_id});
        if (!r.correct) continue;
        cells[{r.carry_class, r.participant_id}].push_back(r.rt_seconds);
    }
    if (cells.empty()) throw std::runtime_error("no correct responses to analyze");

    HumanRtAnalysis analysis;
    for (const auto& key : seen) {
        if (!cells.contains(key)) {
            analysis.warnings.push_back("participant " + key.second + ", class " +
                                        std::to_string(key.first) +
                                        ": no usable responses, cell dropped");
        }
    }
    std::map<int, std::vector<double>> class_observations;
    for (const auto& [key, rts] : cells) {
        class_observations[key.first].push_back(mean_of(iqr_filter(rts)));
    }
    if (class_observations.size() < 2) {
        throw std::runtime_error("human RT analysis needs at least two carry classes");
    }

    std::vector<std::vector<double>> groups;
    std::vector<std::string> labels;
    for (const auto& [carry_class, observations] : class_observations) {
        groups.push_back(observations);
        labels.push_back(std::to_string(carry_class));
    }
    for (std::size_t i = 0; i < groups.size(); ++i) {
        analysis.per_class.push_back(summarize(groups[i], labels[i]));
    }
    analysis.anova = anova_oneway(groups);
    analysis.posthoc = games_howell(groups, labels);
    return analysis;
}

}  // namespace carrysim
