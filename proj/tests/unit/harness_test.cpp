#include <gtest/gtest.h>

#include <sstream>

#include "adjscope/harness.hpp"
#include "adjscope/random.hpp"
#include "adjscope/synthetic.hpp"
#include "support/oracles.hpp"

using namespace adjscope;

namespace {

std::vector<ScoredLabel> zip(const std::vector<double>& s, const std::vector<Label>& l) {
    std::vector<ScoredLabel> out;
    for (std::size_t i = 0; i < s.size(); ++i) out.push_back({s[i], l[i]});
    return out;
}

constexpr Label ID = Label::in_domain;
constexpr Label ADJ = Label::domain_adjacent;

std::vector<Instance> labeled(std::size_t n_id, std::size_t n_adj) {
    std::vector<Instance> t;
    for (std::size_t i = 0; i < n_id + n_adj; ++i) {
        Instance inst;
        inst.id = "s" + std::to_string(i);
        inst.tokens = {"x"};
        inst.split = Split::test;
        inst.label = i < n_id ? ID : ADJ;
        t.push_back(inst);
    }
    return t;
}

} // namespace

TEST(RocAuc, PerfectSeparation) {
    const auto roc = compute_roc_auc(zip({0.1, 0.2, 0.3, 0.8, 0.9}, {ID, ID, ID, ADJ, ADJ}));
    EXPECT_DOUBLE_EQ(roc.auc, 1.0);
}

TEST(RocAuc, AllTiedIsHalf) {
    EXPECT_DOUBLE_EQ(compute_roc_auc(zip({0.4, 0.4, 0.4, 0.4}, {ID, ADJ, ID, ADJ})).auc, 0.5);
}

TEST(RocAuc, SingleLabelFails) {
    EXPECT_THROW(compute_roc_auc(zip({0.1, 0.2}, {ID, ID})), Error);
    EXPECT_THROW(compute_roc_auc({}), Error);
}

TEST(RocAuc, CurveIsMonotoneFromOriginToOne) {
    Rng rng(1);
    std::vector<double> s;
    std::vector<Label> l;
    for (int i = 0; i < 100; ++i) {
        s.push_back(std::round(rng.uniform() * 20.0));
        l.push_back(i % 3 == 0 ? ADJ : ID);
    }
    const auto roc = compute_roc_auc(zip(s, l));
    EXPECT_EQ(roc.points.front().fpr, 0.0);
    EXPECT_EQ(roc.points.front().tpr, 0.0);
    EXPECT_EQ(roc.points.back().fpr, 1.0);
    EXPECT_EQ(roc.points.back().tpr, 1.0);
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
        EXPECT_GE(roc.points[i].fpr, roc.points[i - 1].fpr);
        EXPECT_GE(roc.points[i].tpr, roc.points[i - 1].tpr);
    }
}

TEST(RocAuc, EqualsPairwiseOracleOnRandomFiftyFifty) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> s;
        std::vector<Label> l;
        for (int i = 0; i < 100; ++i) {
            s.push_back(rng.uniform());
            l.push_back(i < 50 ? ID : ADJ);
        }
        EXPECT_NEAR(compute_roc_auc(zip(s, l)).auc, oracle::pairwise_auc(s, l), 1e-12);
    }
}

TEST(RocAuc, InvariantUnderMonotoneTransform) {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s, t;
        std::vector<Label> l;
        for (int i = 0; i < 60; ++i) {
            const double x = std::round(rng.normal() * 4.0) / 4.0;
            s.push_back(x);
            t.push_back(std::exp(3.0 * x) - 7.0);
            l.push_back(rng.uniform() < 0.4 ? ADJ : ID);
        }
        l[0] = ADJ;
        l[1] = ID;
        EXPECT_DOUBLE_EQ(compute_roc_auc(zip(s, l)).auc, compute_roc_auc(zip(t, l)).auc);
    }
}

TEST(Downstream, OracleAndNoFilterArithmetic) {
    // 80 in-domain (parser right on half) + 20 adjacent
    const auto test = labeled(80, 20);
    std::vector<ParseOutcome> outcomes;
    for (std::size_t i = 0; i < 80; ++i) outcomes.push_back({test[i].id, i % 2 == 0});
    const double oracle = downstream_accuracy(test, oracle_flags(test), outcomes);
    const double nofilter = downstream_accuracy(test, std::vector<bool>(100, false), outcomes);
    EXPECT_DOUBLE_EQ(oracle, 0.6);
    EXPECT_DOUBLE_EQ(nofilter, 0.4);
    EXPECT_NEAR(oracle - nofilter, 0.2, 1e-12);
    EXPECT_DOUBLE_EQ(downstream_accuracy(test, std::vector<bool>(100, true), outcomes), 0.2);
}

TEST(Downstream, MissingOutcomeOnlyMattersWhenUnflagged) {
    const auto test = labeled(2, 1);
    const std::vector<ParseOutcome> partial{{"s0", true}};
    EXPECT_THROW(downstream_accuracy(test, {false, false, false}, partial), Error);
    EXPECT_DOUBLE_EQ(downstream_accuracy(test, {false, true, false}, partial), 1.0 / 3.0);
}

TEST(Downstream, OracleDominatesWhenParserPerfect) {
    Rng rng(4);
    const auto test = labeled(40, 10);
    std::vector<ParseOutcome> outcomes;
    for (std::size_t i = 0; i < 40; ++i) outcomes.push_back({test[i].id, true});
    const double best = downstream_accuracy(test, oracle_flags(test), outcomes);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<bool> flags(test.size());
        for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = rng.uniform() < 0.3;
        EXPECT_LE(downstream_accuracy(test, flags, outcomes), best);
    }
}

TEST(Downstream, OracleMinusNoFilterIsAdjacentFraction) {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n_id = 1 + rng.below(100), n_adj = 1 + rng.below(100);
        const auto test = labeled(n_id, n_adj);
        std::vector<ParseOutcome> outcomes;
        for (const auto& t : test) outcomes.push_back({t.id, rng.uniform() < 0.6});
        const double gap = downstream_accuracy(test, oracle_flags(test), outcomes) -
                           downstream_accuracy(test, std::vector<bool>(test.size(), false), outcomes);
        EXPECT_NEAR(gap, static_cast<double>(n_adj) / static_cast<double>(n_id + n_adj), 1e-12);
    }
}

TEST(ParseOutcomes, ReadsAndRejects) {
    std::istringstream ok("{\"id\": \"a\", \"correct\": true}\n\n{\"id\": 7, \"correct\": false}\n");
    const auto o = read_parse_outcomes(ok);
    ASSERT_EQ(o.size(), 2u);
    EXPECT_EQ(o[1].id, "7");
    EXPECT_FALSE(o[1].parser_correct);
    std::istringstream dup("{\"id\": \"a\", \"correct\": true}\n{\"id\": \"a\", \"correct\": true}\n");
    EXPECT_THROW(read_parse_outcomes(dup), Error);
    std::istringstream bad("{\"id\": \"a\", \"correct\": 1}\n");
    EXPECT_THROW(read_parse_outcomes(bad), Error);
}

TEST(RenderTable, AlignedRowsAndMissingCells) {
    const std::vector<ResultRecord> recs{{"cbow", "Blocks", "auc", 0.782},
                                         {"surprise", "Blocks", "auc", 0.827},
                                         {"surprise", "Social", "auc", 0.545}};
    const auto table = render_table(recs, "auc");
    EXPECT_NE(table.find("0.827"), std::string::npos);
    EXPECT_NE(table.find("-"), std::string::npos);
    std::istringstream lines(table);
    std::string line;
    std::size_t width = 0, count = 0;
    while (std::getline(lines, line)) {
        if (count++ == 0) width = line.size();
        EXPECT_EQ(line.size(), width);
    }
    EXPECT_EQ(count, 3u);
}

TEST(DirectEval, OneMethodOneRowAndFlaggingNothingIsNoFilter) {
    SyntheticSpec spec;
    spec.train_sentences = 150;
    spec.test_in_domain = 40;
    spec.test_adjacent = 40;
    auto dom = make_synthetic_domain(spec);
    DomainInput d{"syn", exclude_predicates(dom.corpus, SplitSpec("syn", {kSyntheticExcluded})), dom.outcomes};
    carve_dev(d.splits, 0.2, 1);
    EvalParams params;
    const auto recs = run_direct_eval({d}, {Scheme::cbow}, dom.pretrained, params);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].method, "cbow");
    EXPECT_GE(recs[0].value, 0.0);
    EXPECT_LE(recs[0].value, 1.0);

    auto ds = score_domain(d.splits, Scheme::cbow, dom.pretrained, params);
    const auto mixed = mix_test_set(d.splits.test, 0.2, 3);
    auto never = ds;
    never.threshold.value = 1e9;
    auto always = ds;
    always.threshold.value = -1.0;
    const auto rows = downstream_rows(mixed, {{"never", never}, {"always", always}}, d.outcomes);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0].method, kNoFilter);
    EXPECT_EQ(rows[1].method, kOracle);
    EXPECT_DOUBLE_EQ(rows[2].accuracy, rows[0].accuracy);
    const double adjacent = static_cast<double>(mixed.adjacent) / static_cast<double>(mixed.instances.size());
    EXPECT_DOUBLE_EQ(rows[3].accuracy, adjacent);
    EXPECT_NEAR(rows[1].accuracy - rows[0].accuracy, adjacent, 1e-12);
}

TEST(DownstreamEval, AlwaysHasNoFilterAndOracle) {
    SyntheticSpec spec;
    spec.train_sentences = 150;
    auto dom = make_synthetic_domain(spec);
    DomainInput d{"syn", exclude_predicates(dom.corpus, SplitSpec("syn", {kSyntheticExcluded})), dom.outcomes};
    carve_dev(d.splits, 0.2, 1);
    const auto recs = run_downstream_eval({d}, {Scheme::surprise, Scheme::cbow}, dom.pretrained, EvalParams{});
    ASSERT_EQ(recs.size(), 4u);
    EXPECT_EQ(recs[0].method, kNoFilter);
    EXPECT_EQ(recs[1].method, kOracle);
    EXPECT_NEAR(recs[1].value - recs[0].value, 0.2, 1e-12);
}
