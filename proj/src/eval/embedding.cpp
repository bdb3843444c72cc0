#include "freqpad/eval/embedding.hpp"

#include <algorithm>
#include <map>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "freqpad/error.hpp"

namespace freqpad::eval {

PcaResult pca(const Eigen::MatrixXd& data, int k) {
  const Eigen::Index n = data.rows(), d = data.cols();
  require(n >= 2 && d >= 1, "pca: need at least 2 vectors");
  require(data.allFinite(), "pca: non-finite input");
  require(k >= 1, "pca: k must be positive");
  const Eigen::Index keep = std::min<Eigen::Index>({k, d, n - 1});

  PcaResult out;
  out.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - out.mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  out.components = svd.matrixV().leftCols(keep);
  for (Eigen::Index j = 0; j < keep; ++j) {
    Eigen::Index arg = 0;
    out.components.col(j).cwiseAbs().maxCoeff(&arg);
    if (out.components(arg, j) < 0) out.components.col(j) *= -1.0;
  }
  out.variances = svd.singularValues().head(keep).array().square() / static_cast<double>(n - 1);
  out.scores = centered * out.components;
  return out;
}

EmbeddingReduction reduce_embeddings(const Eigen::MatrixXd& embeddings, int intermediate_dim) {
  require(embeddings.rows() >= 2, "reduce_embeddings: need at least 2 vectors");
  EmbeddingReduction out;
  out.reduced = pca(embeddings, intermediate_dim).scores;
  out.coords = pca(out.reduced, 2).scores;
  if (out.coords.cols() < 2) {
    out.coords.conservativeResize(Eigen::NoChange, 2);
    out.coords.col(1).setZero();
  }
  return out;
}

void write_scatter_png(const std::filesystem::path& path, const Eigen::MatrixXd& coords,
                       std::span<const std::string> groups, int size) {
  require(coords.cols() >= 2 && coords.rows() == static_cast<Eigen::Index>(groups.size()),
          "write_scatter_png: coordinates and groups disagree");
  static const cv::Scalar palette[] = {{60, 160, 60}, {50, 50, 220}, {220, 120, 40}, {160, 60, 160}, {40, 180, 200}};
  std::map<std::string, int> colour;
  for (const auto& g : groups) colour.try_emplace(g, static_cast<int>(colour.size()) % 5);

  cv::Mat img(size, size, CV_8UC3, cv::Scalar(255, 255, 255));
  const int margin = size / 16;
  const double x0 = coords.col(0).minCoeff(), x1 = coords.col(0).maxCoeff();
  const double y0 = coords.col(1).minCoeff(), y1 = coords.col(1).maxCoeff();
  const auto scale = [&](double v, double lo, double hi) {
    return hi > lo ? (v - lo) / (hi - lo) : 0.5;
  };
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    const int px = margin + static_cast<int>(scale(coords(i, 0), x0, x1) * (size - 2 * margin));
    const int py = size - margin - static_cast<int>(scale(coords(i, 1), y0, y1) * (size - 2 * margin));
    cv::circle(img, {px, py}, 3, palette[colour.at(groups[i])], cv::FILLED, cv::LINE_AA);
  }
  int row = 0;
  for (const auto& [name, c] : colour) {
    const int y = 18 + 18 * row++;
    cv::circle(img, {12, y - 4}, 5, palette[c], cv::FILLED, cv::LINE_AA);
    cv::putText(img, name, {22, y}, cv::FONT_HERSHEY_SIMPLEX, 0.45, {30, 30, 30}, 1, cv::LINE_AA);
  }
  require(cv::imwrite(path.string(), img), "write_scatter_png: cannot write " + path.string());
}

}  // namespace freqpad::eval
