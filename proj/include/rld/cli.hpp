#pragma once

// Command-line front end: data synthesis, VAE and teacher training,
// explanation, and faithfulness evaluation. Every subcommand is a pure
// function of its flags, input files, and --seed, so reruns produce
// byte-identical outputs.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace rld {

/// Flags shared by the subcommands. epochs == 0 means the module default
/// (30 for the VAE, 20 for the teacher).
struct RunConfig {
    std::uint64_t seed = 0;

    // data source: either an IDX pair or a synthetic shapes spec "n,h,w,k"
    std::string idx_images;
    std::string idx_labels;
    std::string synth_spec;

    std::size_t latent_dim = 16;
    std::size_t epochs = 0;

    float tau = 1.0f;
    std::size_t n_samples = 1000;
    float lambda1 = 0.7f;
    float lambda2 = 0.3f;

    double step_fraction = 0.02;
    float baseline = 0.0f;
    std::size_t window = 5;
    std::size_t stride = 1;

    std::string teacher_path;
    std::string vae_path;
    std::size_t index = 0;
    std::string indices_spec;

    std::string out_dir = ".";
};

/// Runs one subcommand. Returns 0 on success, 1 on internal or training
/// failure, 2 on usage or input errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// In-process variant; args exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace rld
