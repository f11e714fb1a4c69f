#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace rodopt {

struct ConstraintBlock {
    std::string name;
    int offset = 0;
    int count = 0;
};

// Packed nonlinear program: equality convention c(x) = 0, inequality g(x) <= 0.
struct NlpProblem {
    Eigen::VectorXd x0;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    std::function<double(const Eigen::VectorXd&)> objective;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> equality;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> inequality;
    // fused single-pass evaluation; any output pointer may be null
    std::function<void(const Eigen::VectorXd&, double*, Eigen::VectorXd*, Eigen::VectorXd*)>
        eval_all;

    std::vector<ConstraintBlock> equality_blocks;
    std::vector<ConstraintBlock> inequality_blocks;
    int num_equality = 0;
    int num_inequality = 0;
};

}  // namespace rodopt
