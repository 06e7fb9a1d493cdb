#pragma once

#include <optional>
#include <string>
#include <vector>

#include "finkey/linalg.hpp"
#include "finkey/objective.hpp"

namespace finkey {

using Distribution = RVec;

struct Povm {
    std::vector<std::string> labels;
    std::vector<CMat> elements;

    int size() const { return static_cast<int>(elements.size()); }
    int dim() const { return elements.empty() ? 0 : static_cast<int>(elements.front().rows()); }
    void validate(double tol = 1e-9) const;
};

struct ObservableConstraint {
    CMat op;
    double value = 0.0;
};

// Conditional probability table p(lambda | sigma), stored |Lambda| x |Sigma|.
struct CoarseGraining {
    std::string name;
    std::vector<std::string> target;
    RMat table;

    int source_size() const { return static_cast<int>(table.cols()); }
    int target_size() const { return static_cast<int>(table.rows()); }
    void validate(int source_size) const;
    Povm effective(const Povm& fine) const;

    static CoarseGraining identity(const std::vector<std::string>& labels, std::string name = "fine");
    // outcome j goes to group[j]; groups are numbered 0..labels.size()-1
    static CoarseGraining grouping(std::string name, std::vector<std::string> labels, const std::vector<int>& group);
};

struct AcceptanceSet {
    Distribution reference;  // F-bar over the fine alphabet
    CoarseGraining abort_map;
    double threshold = 0.0;

    bool unique() const { return threshold == 0.0; }
    void validate(int source_size) const;
};

// Which fine outcomes are key rounds, and what Alice's key symbol and Bob's
// guess-side symbol are on those rounds. Used for the error-correction term.
struct KeyRoundTable {
    std::vector<int> alice;  // -1 when the outcome is not a key round
    std::vector<int> bob;

    bool empty() const { return alice.empty(); }
};

struct ProtocolModel {
    std::string name;
    std::vector<int> dims;
    Povm fine_povm;
    std::vector<ObservableConstraint> certainty;
    std::vector<CoarseGraining> coarse_grainings;
    std::optional<AcceptanceSet> acceptance;
    PostProcessingMap postproc;
    int key_alphabet_size = 2;
    KeyRoundTable key_rounds;
    // fraction of key-generation rounds surviving sifting that Tr G does not carry
    double sift_factor = 1.0;

    int dim() const;
    int alice_dim() const { return dims.empty() ? 0 : dims.front(); }
    void validate() const;
};

struct SourceReplacement {
    int alice_dim = 0;
    CMat rho_A;
    std::vector<CMat> alice_povm;  // reconstructed measurement on the reduced space
    std::vector<ObservableConstraint> constraints;
};

// Tomographic constraints fixing rho_A, lifted by I on the remaining factors.
std::vector<ObservableConstraint> marginal_constraints(const CMat& rho_A, int rest_dim);

SourceReplacement source_replace(const std::vector<CVec>& states, const std::vector<double>& probs);
// Same from a Gram matrix <psi_i|psi_j>; no reduction, Alice keeps one dimension per signal.
SourceReplacement source_replace_gram(const CMat& gram, const std::vector<double>& probs);

struct ProtocolSpec {
    std::string preset = "bb84";
    double p_z = 0.5;
    std::string povm = "fine";                      // bb84: fine | phase
    std::vector<std::string> coarse_grainings{"fine"};
    int c = 1;                                       // dpr: number of global phases
    double nu = 0.1;                                 // dpr: intensity per mode
    std::optional<ProtocolModel> custom;
};

ProtocolModel build_protocol(const ProtocolSpec& spec);

// pieces of the presets, exposed for tests
Povm bb84_local_povm(double p_z);
Povm bb84_fine_povm(double p_z);
PostProcessingMap bb84_postproc(double p_z, bool compress = true);
PostProcessingMap mdi_postproc(bool compress = true);
PostProcessingMap dpr_postproc(int c, double p_z, bool compress = true);
Povm dpr_bob_povm();
CMat dpr_gram(int c, double nu);
std::vector<double> dpr_signal_probs(int c, double p_z);
CMat phase_error_projector();

Distribution probability_map(const CMat& rho, const Povm& povm);
Distribution probability_map(const DensityOperator& rho, const Povm& povm);
Distribution coarse_grain(const Distribution& dist, const CoarseGraining& cg);

// H(X|Y) restricted to key rounds, normalised by their total weight.
double conditional_entropy_xy(const Distribution& dist, const KeyRoundTable& table);

}  // namespace finkey
