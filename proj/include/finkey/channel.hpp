#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "finkey/linalg.hpp"
#include "finkey/protocol.hpp"

namespace finkey {

struct ChannelParams {
    double q = 0.0;           // depolarizing parameter
    double theta = 0.0;       // Y rotation, radians
    double L = 0.0;           // km
    double alpha_att = 0.2;   // dB/km
    double eta_d = 1.0;
    double p_d = 0.0;
    double zeta = 0.0;        // phase drift, radians
    double nu = 0.1;
    int c = 1;
    double double_click_to_first = 0.5;  // share of double clicks assigned to detector 1

    double transmittance() const;
    void validate() const;
};

struct FrequencyDistribution {
    std::vector<std::string> alphabet;
    Distribution freq;
    std::vector<std::uint64_t> counts;
    double m = 0.0;
};

CMat depolarize(const CMat& rho, double q, const std::vector<int>& dims, int target);
CMat rotate_y(const CMat& rho, double theta, const std::vector<int>& dims, int target);
DensityOperator depolarize(const DensityOperator& rho, double q, int target);
DensityOperator rotate_y(const DensityOperator& rho, double theta, int target);

// Apply a single-qudit Kraus set to one tensor factor.
CMat apply_local(const CMat& rho, const std::vector<CMat>& kraus, const std::vector<int>& dims, int target);

CMat bell_phi_plus();

// (I (x) Phi_U o Phi_dp)(|Phi+><Phi+|)
CMat bb84_channel_state(double q, double theta);
// rho_{ABC} after Bell measurements on depolarized halves; C holds Charlie's outcome
CMat mdi_channel_state(double q);

// Click statistics of one Bob basis for one Alice signal.
struct DprClicks {
    double none = 0.0, first = 0.0, second = 0.0, both = 0.0;
};
DprClicks dpr_clicks(const ChannelParams& ch, double phi_a, double phi_b);

Distribution simulate_dpr_statistics(const ChannelParams& ch, double p_z);

FrequencyDistribution sample_frequency(const Distribution& dist, std::uint64_t m, std::uint64_t seed,
                                       const std::vector<std::string>& alphabet = {});

// CSV with lines "label,frequency"; a header line is optional.
FrequencyDistribution load_frequency_csv(const std::string& path);

}  // namespace finkey
