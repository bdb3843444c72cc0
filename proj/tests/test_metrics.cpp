#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include <Eigen/Eigenvalues>

#include "freqpad/error.hpp"
#include "freqpad/eval/embedding.hpp"
#include "freqpad/eval/metrics.hpp"
#include "oracles.hpp"

using namespace freqpad;
using namespace freqpad::eval;
using data::Label;

namespace {

ScoreRecord bona(double s) { return {"b", s, Label::BonaFide, "none", "d"}; }
ScoreRecord attack(double s, const std::string& pai = "print") { return {"a", s, Label::Attack, pai, "d"}; }

}  // namespace

TEST(Apcer, Examples) {
  const std::vector<ScoreRecord> low{attack(0.1), attack(0.2), attack(0.3), attack(0.4)};
  EXPECT_EQ(apcer(low, 0.5), 0.0);
  std::vector<ScoreRecord> one = low;
  one[2].score = 0.7;
  EXPECT_EQ(apcer(one, 0.5), 0.25);
  EXPECT_EQ(apcer(low, 0.05), 1.0);
  // A score exactly at the threshold is accepted as bona fide.
  EXPECT_EQ(apcer(low, 0.4), 0.25);
  EXPECT_THROW(apcer(std::vector<ScoreRecord>{attack(0.1), attack(0.1, "replay")}, 0.5), ValidationError);
  EXPECT_THROW(apcer(std::vector<ScoreRecord>{bona(0.1)}, 0.5), ValidationError);
  EXPECT_THROW(apcer(std::vector<ScoreRecord>{}, 0.5), ValidationError);
}

TEST(ApcerWc, MaxOverPais) {
  std::vector<ScoreRecord> r;
  for (int i = 0; i < 10; ++i) r.push_back(attack(i == 0 ? 0.9 : 0.1, "print"));
  for (int i = 0; i < 10; ++i) r.push_back(attack(i < 3 ? 0.9 : 0.1, "replay"));
  r.push_back(bona(0.9));
  const auto per = apcer_per_pai(r, 0.5);
  EXPECT_DOUBLE_EQ(per.at("print"), 0.1);
  EXPECT_DOUBLE_EQ(per.at("replay"), 0.3);
  EXPECT_DOUBLE_EQ(apcer_wc(r, 0.5), 0.3);
  EXPECT_DOUBLE_EQ(apcer_pooled(r, 0.5), 0.2);
  EXPECT_EQ(apcer_wc(std::vector<ScoreRecord>{attack(0.1), attack(0.2, "x")}, 0.5), 0.0);
  EXPECT_EQ(apcer_wc(std::vector<ScoreRecord>{attack(0.1), attack(0.7)}, 0.5), apcer(std::vector<ScoreRecord>{attack(0.1), attack(0.7)}, 0.5));
}

TEST(Bpcer, Examples) {
  std::vector<ScoreRecord> r(10, bona(0.9));
  EXPECT_EQ(bpcer(r, 0.5), 0.0);
  r[4].score = 0.2;
  EXPECT_DOUBLE_EQ(bpcer(r, 0.5), 0.1);
  EXPECT_EQ(bpcer(r, 0.95), 1.0);
}

TEST(Acer, PublishedRowsAtOneDecimal) {
  EXPECT_NEAR(acer(0.014, 0.016), 0.015, 1e-15);
  EXPECT_EQ(format_percent(acer(0.014, 0.016)), "1.5");
  EXPECT_NEAR(acer(0.031, 0.008), 0.0195, 1e-15);
  EXPECT_EQ(format_percent(acer(0.031, 0.008)), "2.0");
  EXPECT_EQ(acer(0.0, 0.0), 0.0);
}

TEST(Hter, ArithmeticAndSymmetry) {
  EXPECT_EQ(hter(0.0, 0.0), 0.0);
  EXPECT_NEAR(hter(0.2, 0.1), 0.15, 1e-15);
  EXPECT_EQ(hter(0.2, 0.1), hter(0.1, 0.2));
}

TEST(FormatPercent, Rounding) {
  EXPECT_EQ(format_percent(0.02), "2.0");
  EXPECT_EQ(format_percent(0.015), "1.5");
  EXPECT_EQ(format_percent(0.00049), "0.0");
  EXPECT_EQ(format_percent(0.00051), "0.1");
  EXPECT_EQ(format_percent(0.00149999), "0.1");
  EXPECT_EQ(format_percent(1.0), "100.0");
  EXPECT_EQ(format_percent(0.0), "0.0");
}

TEST(Auc, Examples) {
  EXPECT_EQ(auc(std::vector<ScoreRecord>{bona(0.9), bona(0.8), attack(0.1), attack(0.2)}), 1.0);
  EXPECT_EQ(auc(std::vector<ScoreRecord>{bona(0.5), bona(0.5), attack(0.5), attack(0.5)}), 0.5);
  EXPECT_EQ(auc(std::vector<ScoreRecord>{bona(0.1), attack(0.9)}), 0.0);
  EXPECT_THROW(auc(std::vector<ScoreRecord>{bona(0.1)}), ValidationError);
}

TEST(Auc, EqualsPairCountingOracle) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const auto records = check::random_records(rng, 200);
    EXPECT_EQ(auc(records), check::auc_by_pairs(records)) << trial;
    for (double t : {0.0, 0.25, 0.5, 0.55, 1.0}) {
      EXPECT_EQ(bpcer(records, t), check::bpcer_by_count(records, t));
      EXPECT_EQ(apcer_pooled(records, t), check::apcer_by_count(records, t));
      double worst = 0.0;
      for (const auto& [pai, value] : apcer_per_pai(records, t)) {
        EXPECT_EQ(value, check::apcer_by_count(records, t, pai));
        worst = std::max(worst, value);
      }
      EXPECT_EQ(apcer_wc(records, t), worst);
    }
  }
}

TEST(Auc, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto records = check::random_records(rng, 60);
    const double a = auc(records);
    for (auto& r : records) r.score = std::exp(3.0 * r.score) - 5.0;
    EXPECT_EQ(auc(records), a);
  }
}

TEST(ErrorRates, MonotoneInThreshold) {
  std::mt19937_64 rng(9);
  const auto records = check::random_records(rng, 150);
  double prev_a = 2.0, prev_b = -1.0;
  for (double t = -0.05; t <= 1.06; t += 0.01) {
    const double a = apcer_pooled(records, t), b = bpcer(records, t);
    EXPECT_LE(a, prev_a);
    EXPECT_GE(b, prev_b);
    prev_a = a;
    prev_b = b;
  }
}

TEST(EerThreshold, Examples) {
  EXPECT_DOUBLE_EQ(eer_threshold(std::vector<ScoreRecord>{bona(0.9), bona(0.8), attack(0.1), attack(0.2)}), 0.5);
  const std::vector<ScoreRecord> pair{bona(1.0), attack(0.0)};
  const double t = eer_threshold(pair);
  EXPECT_DOUBLE_EQ(t, 0.5);
  EXPECT_EQ(apcer_pooled(pair, t), 0.0);
  EXPECT_EQ(bpcer(pair, t), 0.0);
  // All scores equal: both candidates have |APCER - BPCER| = 1, lower BPCER wins.
  const std::vector<ScoreRecord> same{bona(0.4), bona(0.4), attack(0.4)};
  const double ts = eer_threshold(same);
  EXPECT_EQ(ts, 0.4);
  EXPECT_EQ(apcer_pooled(same, ts), 1.0);
  EXPECT_EQ(bpcer(same, ts), 0.0);
}

TEST(EerThreshold, MinimizesGapOverAllCuts) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto records = check::random_records(rng, 80);
    const double t = eer_threshold(records);
    const double gap = std::abs(apcer_pooled(records, t) - bpcer(records, t));
    // Every distinct cut is realized by some threshold on a fine grid of the score lattice.
    for (double probe = -0.025; probe <= 1.05; probe += 0.025)
      EXPECT_LE(gap, std::abs(apcer_pooled(records, probe) - bpcer(records, probe)) + 1e-15);
  }
}

TEST(Report, ComputeAndJsonRoundTrip) {
  std::vector<ScoreRecord> r{bona(0.9), bona(0.3), attack(0.6, "print"), attack(0.1, "replay"), attack(0.2, "replay")};
  const auto rep = compute_report(r, 0.5, "fold");
  EXPECT_EQ(rep.n_bona_fide, 2);
  EXPECT_EQ(rep.n_attack, 3);
  EXPECT_EQ(rep.apcer_wc, 1.0);
  EXPECT_DOUBLE_EQ(rep.apcer, 1.0 / 3.0);
  EXPECT_EQ(rep.bpcer, 0.5);
  EXPECT_EQ(rep.acer, 0.75);
  EXPECT_DOUBLE_EQ(rep.hter, 0.5 * (1.0 / 3.0 + 0.5));
  EXPECT_EQ(rep.attack_count_per_pai.at("replay"), 2);
  const auto back = report_from_json(to_json(rep));
  EXPECT_EQ(back.apcer_per_pai, rep.apcer_per_pai);
  EXPECT_EQ(back.acer, rep.acer);
  EXPECT_EQ(back.auc, rep.auc);
  EXPECT_EQ(back.name, "fold");
  EXPECT_THROW(compute_report(std::vector<ScoreRecord>{bona(0.2)}, 0.5), ValidationError);
}

TEST(FoldStat, PopulationConvention) {
  const std::vector<double> acers{0.02, 0.04};
  const auto s = fold_stat(acers);
  EXPECT_NEAR(s.mean, 0.03, 1e-15);
  EXPECT_NEAR(s.std, 0.01, 1e-15);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> xs(1 + trial % 7);
    for (auto& x : xs) x = u(rng);
    const auto [mean, sd] = check::mean_std_by_hand(xs);
    const auto st = fold_stat(xs);
    EXPECT_EQ(st.mean, mean);
    EXPECT_EQ(st.std, sd);
  }
  EXPECT_THROW(fold_stat(std::vector<double>{}), ValidationError);
}

TEST(RenderTable, IncludesMeanRowForSeveralReports) {
  std::vector<ScoreRecord> r{bona(0.9), attack(0.1)};
  std::vector<MetricReport> reports{compute_report(r, 0.5, "a"), compute_report(r, 0.95, "b")};
  const std::string one = render_table(std::span(reports).first(1));
  const std::string two = render_table(reports);
  EXPECT_EQ(one.find("mean"), std::string::npos);
  EXPECT_NE(two.find("mean+-std"), std::string::npos);
  EXPECT_NE(two.find("25.0+-25.0"), std::string::npos);
}

TEST(Scores, CsvRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "freqpad_test_scores.csv";
  const std::vector<ScoreRecord> r{bona(0.123456789012345), attack(1e-9, "replay")};
  write_scores(path, r);
  const auto back = read_scores(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].score, r[0].score);
  EXPECT_EQ(back[1].score, r[1].score);
  EXPECT_EQ(back[1].pai, "replay");
  EXPECT_EQ(back[1].label, Label::Attack);
}

TEST(Pca, MatchesDenseEigensolver) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(60, 8);
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) x(i, j) = g(rng) * (j + 1);
  const auto result = pca(x, 5);
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / (x.rows() - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  for (int k = 0; k < 5; ++k) {
    const int idx = 7 - k;
    EXPECT_NEAR(result.variances(k), eig.eigenvalues()(idx), 1e-9 * eig.eigenvalues()(7));
    EXPECT_NEAR(std::abs(result.components.col(k).dot(eig.eigenvectors().col(idx))), 1.0, 1e-8);
    const auto col = result.components.col(k);
    Eigen::Index arg;
    col.cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(col(arg), 0.0);
  }
  EXPECT_LT((result.scores - centered * result.components).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Pca, RankThreeDataAndNestedReconstruction) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  Eigen::MatrixXd basis(3, 20), coef(100, 3);
  for (int i = 0; i < basis.size(); ++i) basis.data()[i] = g(rng);
  for (int i = 0; i < coef.size(); ++i) coef.data()[i] = g(rng) * (1 + i % 3);
  const Eigen::MatrixXd x = coef * basis;
  const auto two = pca(x, 2);
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(centered.transpose() * centered / 99.0);
  const double top2 = eig.eigenvalues()(19) + eig.eigenvalues()(18);
  EXPECT_GE(two.variances.sum(), top2 * (1 - 1e-12));

  Eigen::MatrixXd wide(150, 200);
  for (int i = 0; i < wide.size(); ++i) wide.data()[i] = g(rng);
  const Eigen::MatrixXd wc = wide.rowwise() - wide.colwise().mean();
  auto residual = [&](int k) {
    const auto p = pca(wide, k);
    return (wc - p.scores * p.components.transpose()).squaredNorm();
  };
  EXPECT_LE(residual(128), residual(64));
}

TEST(ReduceEmbeddings, TwoDimensionalInputIsIsometric) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(30, 2);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  const auto red = reduce_embeddings(x);
  ASSERT_EQ(red.coords.cols(), 2);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j)
      EXPECT_NEAR((red.coords.row(i) - red.coords.row(j)).norm(), (x.row(i) - x.row(j)).norm(), 1e-10);
  EXPECT_THROW(reduce_embeddings(Eigen::MatrixXd(1, 4)), ValidationError);
}
