#pragma once

#include <string>
#include <vector>

#include "carrysim/dataset.hpp"

namespace carrysim {

struct GroupSummary {
    std::string label;
    long n = 0;
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation, n-1 denominator
};

struct AnovaResult {
    double f = 0.0;
    long df_between = 0;
    long df_within = 0;
    double p_value = 1.0;
    double eta_squared = 0.0;
};

struct PairwiseComparison {
    std::string group_i;
    std::string group_j;
    double mean_diff = 0.0;   // mean_j - mean_i
    double q_statistic = 0.0;
    double welch_df = 0.0;
    double p_value = 1.0;
};

// All unordered pairwise comparisons plus the consecutive-group ordering
// chain, e.g. "0 < 1 < 2 < 3". annotated_chain() appends the significance
// stars shared by every strict inequality in the chain.
struct PosthocResult {
    std::vector<PairwiseComparison> pairs;
    std::vector<GroupSummary> groups;
    std::string chain;

    std::string annotated_chain() const;
};

struct RtRecord {
    std::string participant_id;
    Operator op = Operator::Add;
    int carry_class = 0;
    double rt_seconds = 0.0;
    bool correct = false;
};

struct HumanRtAnalysis {
    std::vector<GroupSummary> per_class;
    AnovaResult anova;
    PosthocResult posthoc;
    std::vector<std::string> warnings;
};

// --- special functions -----------------------------------------------------

double normal_cdf(double x);
double normal_pdf(double x);

// Regularized incomplete beta I_x(a, b) by continued fractions.
double regularized_incomplete_beta(double a, double b, double x);

// Upper tail of the F distribution.
double f_upper_tail(double f, double df1, double df2);

// CDF of the range of k iid standard normals.
double normal_range_cdf(double r, int k);

// CDF of the studentized range of k standard normals with nu error degrees
// of freedom, by nested quadrature. Throws on non-convergence.
double studentized_range_cdf(double x, int k, double nu);

// --- analyses ----------------------------------------------------------------

// Values inside the closed range [Q1 - 1.5 IQR, Q3 + 1.5 IQR] are retained;
// quartiles interpolate linearly between order statistics.
std::vector<double> iqr_filter(const std::vector<double>& values);

GroupSummary summarize(const std::vector<double>& values, const std::string& label = "");

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups);
AnovaResult anova_from_summary(const std::vector<GroupSummary>& groups);

PosthocResult games_howell(const std::vector<std::vector<double>>& groups,
                           const std::vector<std::string>& labels = {});
PosthocResult games_howell_from_summary(const std::vector<GroupSummary>& groups);

// Keeps correct answers, IQR-filters each (participant, class) cell, then
// treats per-participant cell means as the class observations.
HumanRtAnalysis human_rt_pipeline(const std::vector<RtRecord>& records);

}  // namespace carrysim
