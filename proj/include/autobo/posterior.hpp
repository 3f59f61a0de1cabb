#ifndef AUTOBO_POSTERIOR_HPP
#define AUTOBO_POSTERIOR_HPP
#pragma once

namespace autobo {

/// Posterior of the latent function at one point, in raw output units.
/// `sigma` excludes observation noise.
struct PosteriorPrediction {
    double mu = 0.0;
    double sigma = 0.0;
};

} // namespace autobo

#endif // AUTOBO_POSTERIOR_HPP
