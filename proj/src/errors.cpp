#include "atp/errors.hpp"

namespace atp {

void require(bool cond, const std::string& what) {
  if (!cond) throw ContractError(what);
}

void require_dims(bool cond, const std::string& what) {
  if (!cond) throw DimensionError(what);
}

}  // namespace atp
