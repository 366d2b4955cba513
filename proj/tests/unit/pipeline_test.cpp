#include <gtest/gtest.h>

#include <sstream>
#include <sys/wait.h>

#include "adjscope/pipeline.hpp"
#include "adjscope/synthetic.hpp"
#include "support/oracles.hpp"

using namespace adjscope;
namespace fs = std::filesystem;

namespace {

SyntheticSpec small_spec(const std::string& name, std::uint64_t seed) {
    SyntheticSpec s;
    s.domain = name;
    s.seed = seed;
    s.train_sentences = 120;
    s.train_adjacent = 10;
    s.test_in_domain = 40;
    s.test_adjacent = 30;
    return s;
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(ADJSCOPE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t count_lines(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) n += !line.empty();
    return n;
}

class PipelineTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = oracle::fresh_dir("pipeline");
        write_synthetic_workspace(dir_, {small_spec("alpha", 1), small_spec("beta", 2)});
        cfg_ = load_config((dir_ / "config.json").string());
        cfg_.epochs = 3;
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path dir_;
    RunConfig cfg_;
    std::ostringstream log_;
};

} // namespace

TEST_F(PipelineTest, StagedRunMatchesInMemoryEvaluation) {
    cfg_.methods = {Scheme::surprise, Scheme::cbow};
    const auto staged = run_end_to_end(cfg_, EvalMode::auc, log_);
    ASSERT_EQ(staged.size(), 4u);

    const auto pretrained = load_pretrained(cfg_, log_);
    std::vector<DomainInput> domains;
    for (const auto& dc : cfg_.domains) domains.push_back(prepare_domain(cfg_, dc, log_));
    const auto direct = run_direct_eval(domains, cfg_.methods, pretrained, cfg_.eval_params());
    ASSERT_EQ(direct.size(), staged.size());
    for (std::size_t i = 0; i < direct.size(); ++i) {
        EXPECT_EQ(direct[i].method, staged[i].method);
        EXPECT_EQ(direct[i].domain, staged[i].domain);
        EXPECT_EQ(direct[i].value, staged[i].value);
    }
    EXPECT_TRUE(fs::exists(dir_ / "out" / "reports" / "auc.txt"));
    EXPECT_EQ(count_lines(dir_ / "out" / "reports" / "auc.jsonl"), 4u);
}

TEST_F(PipelineTest, EncodedRecordsCoverEverySentenceOrSidecar) {
    const auto pretrained = load_pretrained(cfg_, log_);
    stage_encode(cfg_, Scheme::cbow, pretrained, log_);
    const Layout layout{cfg_.output_dir};
    for (const auto& dc : cfg_.domains) {
        const auto d = prepare_domain(cfg_, dc, log_);
        const auto total = d.splits.train.size() + d.splits.dev.size() + d.splits.test.size();
        EXPECT_EQ(count_lines(layout.encoded(dc.name, Scheme::cbow)) + count_lines(layout.skipped(dc.name, Scheme::cbow)),
                  total);
    }
}

TEST_F(PipelineTest, AllOovSentenceGoesToSidecar) {
    {
        std::ofstream out(dir_ / "alpha.jsonl", std::ios::app);
        out << R"({"id": "all-oov", "text": "qqq zzz", "predicates": ["topic0"], "split": "test"})" << '\n';
    }
    cfg_.domains.resize(1);
    const auto pretrained = load_pretrained(cfg_, log_);
    stage_encode(cfg_, Scheme::cbow, pretrained, log_);
    const auto sidecar = oracle::read_file(Layout{cfg_.output_dir}.skipped("alpha", Scheme::cbow));
    EXPECT_NE(sidecar.find("all-oov"), std::string::npos);
    stage_score(cfg_, Scheme::cbow, log_);
    const auto scores = read_scores(Layout{cfg_.output_dir}.scores("alpha", Scheme::cbow));
    const auto it = std::find_if(scores.test.begin(), scores.test.end(), [](const InstanceScore& s) { return s.id == "all-oov"; });
    ASSERT_NE(it, scores.test.end());
    EXPECT_FALSE(it->score.has_value());
}

TEST_F(PipelineTest, SurpriseEncodeWithoutModelNamesArtifact) {
    const auto pretrained = load_pretrained(cfg_, log_);
    try {
        stage_encode(cfg_, Scheme::surprise, pretrained, log_);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find(".model"), std::string::npos) << e.what();
    }
}

TEST_F(PipelineTest, DownstreamReportHasBoundRows) {
    cfg_.methods = {Scheme::cbow};
    const auto recs = run_end_to_end(cfg_, EvalMode::downstream, log_);
    ASSERT_EQ(recs.size(), 6u);
    for (std::size_t d = 0; d < 2; ++d) {
        EXPECT_EQ(recs[3 * d].method, kNoFilter);
        EXPECT_EQ(recs[3 * d + 1].method, kOracle);
        EXPECT_NEAR(recs[3 * d + 1].value - recs[3 * d].value, 0.2, 1e-12);
    }
}

TEST_F(PipelineTest, ExportedDomainTableMatchesModel) {
    const auto pretrained = load_pretrained(cfg_, log_);
    stage_train_mapping(cfg_, pretrained, log_);
    export_domain_table(cfg_, pretrained, "alpha", dir_ / "alpha.domain.txt");
    const auto exported = load_embeddings((dir_ / "alpha.domain.txt").string());
    const auto expect = materialize_domain_table(load_model(Layout{cfg_.output_dir}.model("alpha").string()), pretrained);
    ASSERT_EQ(exported.size(), expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) {
        const auto a = exported.row(i), b = expect.row(i);
        EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
    }
}

TEST_F(PipelineTest, CliExitCodesAndDeterminism) {
    const auto log = dir_ / "cli.log";
    const auto config = (dir_ / "config.json").string();
    EXPECT_EQ(run_cli("train-mapping --config " + config + " --epochs 2", log), 0) << oracle::read_file(log);
    const auto model = oracle::read_file(dir_ / "out" / "models" / "alpha.model");
    EXPECT_FALSE(model.empty());
    EXPECT_EQ(run_cli("train-mapping --config " + config + " --epochs 2", log), 0);
    EXPECT_EQ(oracle::read_file(dir_ / "out" / "models" / "alpha.model"), model);

    EXPECT_EQ(run_cli("train-mapping --config " + config + " --pretrained " + (dir_ / "nope.txt").string(), log), 2);
    EXPECT_EQ(run_cli("encode --config " + config + " --scheme lstm", log), 2);
    EXPECT_EQ(run_cli("frobnicate", log), 2);
    EXPECT_EQ(run_cli("evaluate --config " + config + " --mode auc --methods frequency", log), 1); // no scores yet

    EXPECT_EQ(run_cli("encode --config " + config + " --scheme cbow", log), 0) << oracle::read_file(log);
    EXPECT_EQ(run_cli("score --config " + config + " --scheme cbow", log), 0) << oracle::read_file(log);
    EXPECT_EQ(run_cli("evaluate --config " + config + " --mode auc --methods cbow", log), 0) << oracle::read_file(log);
    EXPECT_EQ(count_lines(dir_ / "out" / "reports" / "auc.jsonl"), 2u);
    const auto staged = oracle::read_file(dir_ / "out" / "reports" / "auc.jsonl");

    // end-to-end from scratch into a second directory gives identical results
    EXPECT_EQ(run_cli("evaluate --end-to-end --config " + config + " --methods cbow --output-dir " +
                          (dir_ / "out2").string(), log),
              0)
        << oracle::read_file(log);
    EXPECT_EQ(oracle::read_file(dir_ / "out2" / "reports" / "auc.jsonl"), staged);
}

TEST(Cli, ConfigFromEnvironment) {
    const auto dir = oracle::fresh_dir("env");
    write_synthetic_workspace(dir, {small_spec("gamma", 3)});
    const auto log = dir / "log.txt";
    const std::string cmd = std::string(kConfigEnvVar) + "=" + (dir / "config.json").string() + " " +
                            ADJSCOPE_CLI_PATH + " encode --scheme frequency > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    EXPECT_TRUE(WIFEXITED(status) && WEXITSTATUS(status) == 0) << oracle::read_file(log);
    EXPECT_TRUE(fs::exists(dir / "out" / "encoded" / "gamma" / "frequency.jsonl"));
    fs::remove_all(dir);
}

TEST(Cli, SynthWritesWorkspace) {
    const auto dir = oracle::fresh_dir("synth");
    const auto log = dir / "log.txt";
    EXPECT_EQ(run_cli("synth --out " + (dir / "ws").string() + " --domains 2", log), 0) << oracle::read_file(log);
    const auto cfg = load_config((dir / "ws" / "config.json").string());
    EXPECT_EQ(cfg.domains.size(), 2u);
    EXPECT_NO_THROW(validate(cfg, {true}));
    fs::remove_all(dir);
}
