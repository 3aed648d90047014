#include "msbo/acquisition.hpp"

#include <stdexcept>

namespace msbo {

double batch_improvement_mc(const Eigen::MatrixXd& samples, double incumbent) {
  if (samples.rows() < 1) throw std::invalid_argument("batch_improvement_mc: no samples");
  return batch_improvement_mc(samples, incumbent,
                              Eigen::VectorXd::Constant(samples.rows(), 1.0 / samples.rows()));
}

double batch_improvement_mc(const Eigen::MatrixXd& samples, double incumbent,
                            const Eigen::VectorXd& weights) {
  if (samples.rows() < 1) throw std::invalid_argument("batch_improvement_mc: no samples");
  if (weights.size() != samples.rows())
    throw std::invalid_argument("batch_improvement_mc: weight count mismatch");
  double total = 0.0;
  for (int i = 0; i < samples.rows(); ++i) {
    const double improvement = samples.row(i).maxCoeff() - incumbent;
    if (improvement > 0.0) total += weights[i] * improvement;
  }
  return total;
}

void TreeVariables::validate() const {
  layout.validate();
  if (flat.size() != layout.variable_count())
    throw std::invalid_argument("tree variables: flat length mismatch");
  for (int i = 0; i < flat.size(); ++i)
    if (flat[i] < -1e-12 || flat[i] > 1.0 + 1e-12)
      throw std::invalid_argument("tree variables: coordinate outside the unit box");
}

Eigen::VectorXd TreeVariables::node_point(int level, int node) const {
  return flat.segment(layout.slice_offset(level, node), layout.dim);
}

Eigen::VectorXd extract_candidate(const TreeVariables& vars) {
  return vars.flat.head(vars.layout.dim);
}

AcquisitionValue multi_step_objective(const GpModel& model, const TreeLayout& layout,
                                      const TreeVariables& vars, const BaseSampleTree& z,
                                      double incumbent) {
  vars.validate();
  std::vector<double> stage_sums;
  const double value = multi_step_value<double>(
      model, layout, std::span<const double>(vars.flat.data(), vars.flat.size()), z, incumbent,
      &stage_sums);
  AcquisitionValue out;
  out.value = value;
  out.per_stage = Eigen::Map<const Eigen::VectorXd>(stage_sums.data(), stage_sums.size());
  return out;
}

double eno_objective(const GpModel& model, int horizon, int m1, const Eigen::VectorXd& vars,
                     const Eigen::VectorXd& level1_z, const Eigen::VectorXd& level1_w,
                     const Eigen::MatrixXd& mc_z, double incumbent) {
  return eno_value<double>(model, horizon, m1, std::span<const double>(vars.data(), vars.size()),
                           level1_z, level1_w, mc_z, incumbent);
}

}  // namespace msbo
