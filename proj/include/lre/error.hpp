#pragma once

#include <stdexcept>
#include <string>

namespace lre {

/// Invalid input, configuration, or file contents.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss and could not recover.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch, double last_finite_loss)
      : Error(what), epoch_(epoch), last_finite_loss_(last_finite_loss) {}

  int epoch() const { return epoch_; }
  double last_finite_loss() const { return last_finite_loss_; }

 private:
  int epoch_;
  double last_finite_loss_;
};

}  // namespace lre
