#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace enscert::cli {

struct GlobalOptions {
    std::string config_path;
    std::string out_dir;              // overrides config "out"
    std::optional<uint64_t> seed;     // overrides config "seed"
    std::optional<int> jobs;          // overrides config "jobs"
};

int cmd_train(const GlobalOptions& opts);
int cmd_certify(const GlobalOptions& opts);
int cmd_conditions(const GlobalOptions& opts);
int cmd_simulate(const GlobalOptions& opts);
int cmd_eval(const GlobalOptions& opts);

}  // namespace enscert::cli
