#pragma once

#include <string>
#include <vector>

namespace kolmo {

/// Smooth even cutoff with phi = 1 on (-1,1), phi = 0 outside (-2,2) and
/// max |t phi'(t)| <= 2.
///
/// The ramp is logarithmic, phi0(t) = log(b/t)/log(b/a) on [a, b] with
/// [a, b] = [1+mu, 2-mu], so |t phi0'| is constant 1/log(b/a); polynomial or
/// cosine ramps violate the |t phi'| <= 2 constraint on [1,2].  The ramp is
/// then mollified at scale mu by convolution with a compactly supported C^inf
/// bump, which keeps phi exactly 1 below t = 1 and exactly 0 above t = 2.
/// The constraint is verified numerically on a dense grid at build time.
struct CutoffProfile {
    double mu = 0.05;
    double verified_max_t_phi_prime = 0.0;
    /// dense tables on [0, table_max]
    double table_max = 2.25;
    std::vector<double> phi_table;
    std::vector<double> dphi_table;

    double phi(double t) const;
    double dphi(double t) const;
};

/// Builds the profile; throws if the mollification width leaves the
/// |t phi'| <= 2 constraint violated (the measured max is reported).
CutoffProfile build_cutoff_profile(double mu = 0.05);

/// "t,phi,tphi_prime" rows on a uniform grid over [0, 2.2]
void write_cutoff_csv(const CutoffProfile& profile, const std::string& path, int samples = 2201);

}  // namespace kolmo
