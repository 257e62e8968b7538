#include "kolmo/cutoff.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kolmo {

namespace {

constexpr int kTableSize = 20001;

// normalized C^inf bump on (-1, 1)
double bump(double v) {
    if (std::abs(v) >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - v * v));
}

struct Ramp {
    double a, b, log_ratio;
    double value(double t) const {
        if (t <= a) return 1.0;
        if (t >= b) return 0.0;
        return std::log(b / t) / log_ratio;
    }
    double derivative(double t) const {
        if (t <= a || t >= b) return 0.0;
        return -1.0 / (t * log_ratio);
    }
};

}  // namespace

double CutoffProfile::phi(double t) const {
    const double at = std::abs(t);
    if (at >= table_max) return 0.0;
    const double u = at / table_max * (phi_table.size() - 1);
    const std::size_t i = static_cast<std::size_t>(u);
    if (i + 1 >= phi_table.size()) return phi_table.back();
    const double w = u - i;
    return (1.0 - w) * phi_table[i] + w * phi_table[i + 1];
}

double CutoffProfile::dphi(double t) const {
    const double at = std::abs(t);
    if (at >= table_max) return 0.0;
    const double u = at / table_max * (dphi_table.size() - 1);
    const std::size_t i = static_cast<std::size_t>(u);
    double d;
    if (i + 1 >= dphi_table.size()) {
        d = dphi_table.back();
    } else {
        const double w = u - i;
        d = (1.0 - w) * dphi_table[i] + w * dphi_table[i + 1];
    }
    return t < 0.0 ? -d : d;
}

CutoffProfile build_cutoff_profile(double mu) {
    if (!(mu > 0.0 && mu < 0.2))
        throw std::invalid_argument("cutoff profile: mollification width must lie in (0, 0.2)");
    const Ramp ramp{1.0 + mu, 2.0 - mu, std::log((2.0 - mu) / (1.0 + mu))};

    // quadrature weights of the bump on (-1, 1)
    const int nq = 129;
    std::vector<double> qv(nq), qw(nq);
    double norm = 0.0;
    for (int i = 0; i < nq; ++i) {
        qv[i] = -1.0 + 2.0 * i / double(nq - 1);
        qw[i] = bump(qv[i]);
        norm += qw[i];
    }
    for (double& w : qw) w /= norm;

    CutoffProfile profile;
    profile.mu = mu;
    profile.phi_table.resize(kTableSize);
    profile.dphi_table.resize(kTableSize);
    for (int i = 0; i < kTableSize; ++i) {
        const double t = profile.table_max * i / double(kTableSize - 1);
        // the shrunk ramp is constant outside [1, 2], so the convolution is
        // exactly 1 below t = 1 and exactly 0 above t = 2
        if (t <= 1.0) {
            profile.phi_table[i] = 1.0;
            profile.dphi_table[i] = 0.0;
            continue;
        }
        if (t >= 2.0) {
            profile.phi_table[i] = 0.0;
            profile.dphi_table[i] = 0.0;
            continue;
        }
        double v = 0.0, dv = 0.0;
        for (int j = 0; j < nq; ++j) {
            v += ramp.value(t - mu * qv[j]) * qw[j];
            dv += ramp.derivative(t - mu * qv[j]) * qw[j];
        }
        profile.phi_table[i] = v;
        profile.dphi_table[i] = dv;
    }

    // constraint check on a 10^4-point grid
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double t = 2.5 * i / 9999.0;
        worst = std::max(worst, std::abs(t * profile.dphi(t)));
    }
    profile.verified_max_t_phi_prime = worst;
    if (worst > 2.0) {
        std::ostringstream msg;
        msg << "cutoff profile: |t phi'| constraint violated after mollification (measured "
            << worst << " > 2); reduce mu";
        throw std::invalid_argument(msg.str());
    }
    return profile;
}

void write_cutoff_csv(const CutoffProfile& profile, const std::string& path, int samples) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "t,phi,tphi_prime\n";
    char buf[160];
    for (int i = 0; i < samples; ++i) {
        const double t = 2.2 * i / double(samples - 1);
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", t, profile.phi(t),
                      t * profile.dphi(t));
        out << buf;
    }
}

}  // namespace kolmo
