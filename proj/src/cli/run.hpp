#pragma once

#include <string>

#include "config.hpp"

namespace bhc::cli {

struct GlobalFlags {
    std::string out_dir = ".";
    int threads = 0;  // 0: all cores
};

int run_evolve(const ExperimentConfig& cfg, const GlobalFlags& g);
int run_predict(const ExperimentConfig& cfg, const GlobalFlags& g);
int run_compare(const ExperimentConfig& cfg, const GlobalFlags& g);
int run_basis(const ExperimentConfig& cfg);

}  // namespace bhc::cli
