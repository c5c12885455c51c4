#include "vcx/rng.hpp"

#include "vcx/error.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace vcx {

double Rng::normal() {
    // 1 - uniform() lies in (0, 1], keeping the logarithm finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string Rng::serialize() const {
    std::ostringstream out;
    out << engine_;
    return out.str();
}

Rng Rng::deserialize(const std::string& state) {
    Rng rng;
    std::istringstream in(state);
    in >> rng.engine_;
    if (!in) fail(ErrorCode::kParse, "corrupt generator state");
    return rng;
}

}  // namespace vcx
