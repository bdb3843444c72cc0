#pragma once

#include <filesystem>
#include <span>
#include <string>

#include <Eigen/Dense>

namespace freqpad::eval {

struct PcaResult {
  Eigen::MatrixXd scores;      // n x k projections of the centered data
  Eigen::MatrixXd components;  // d x k orthonormal directions
  Eigen::VectorXd variances;   // k eigenvalues of the covariance, descending
  Eigen::VectorXd mean;        // d
};

// Centered PCA keeping min(k, d, n - 1) components. Each direction's largest
// absolute loading is made positive so results are sign-stable.
PcaResult pca(const Eigen::MatrixXd& data, int k);

struct EmbeddingReduction {
  Eigen::MatrixXd reduced;  // n x min(128, d, n - 1), for external t-SNE tools
  Eigen::MatrixXd coords;   // n x 2 fallback projection
};

// Rows are embedding vectors; needs at least 2 rows.
EmbeddingReduction reduce_embeddings(const Eigen::MatrixXd& embeddings, int intermediate_dim = 128);

// 2-D scatter plot, one colour per group label.
void write_scatter_png(const std::filesystem::path& path, const Eigen::MatrixXd& coords,
                       std::span<const std::string> groups, int size = 512);

}  // namespace freqpad::eval
