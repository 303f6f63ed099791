#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace intraloss {

// Row-major dense doubles throughout. Batches are n x d, class weights d x c.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct ZeroNormRow : std::runtime_error {
    explicit ZeroNormRow(const std::string& what) : std::runtime_error(what) {}
};

struct ShapeMismatch : std::invalid_argument {
    explicit ShapeMismatch(const std::string& what) : std::invalid_argument(what) {}
};

struct DomainError : std::domain_error {
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

struct LabelOutOfRange : std::out_of_range {
    explicit LabelOutOfRange(const std::string& what) : std::out_of_range(what) {}
};

struct EmptyBatch : std::invalid_argument {
    explicit EmptyBatch(const std::string& what) : std::invalid_argument(what) {}
};

struct UnsupportedScheme : std::invalid_argument {
    explicit UnsupportedScheme(const std::string& what) : std::invalid_argument(what) {}
};

struct InvalidSpec : std::invalid_argument {
    explicit InvalidSpec(const std::string& what) : std::invalid_argument(what) {}
};

struct InsufficientData : std::invalid_argument {
    explicit InsufficientData(const std::string& what) : std::invalid_argument(what) {}
};

struct DegenerateClass : std::runtime_error {
    explicit DegenerateClass(const std::string& what) : std::runtime_error(what) {}
};

struct NonFiniteLoss : std::runtime_error {
    NonFiniteLoss(const std::string& what, long iteration)
        : std::runtime_error(what), iteration(iteration) {}
    long iteration;
};

}  // namespace intraloss
