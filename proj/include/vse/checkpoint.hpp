#pragma once

#include <string>

#include "vse/config.hpp"
#include "vse/model.hpp"

namespace vse {

// A checkpoint is a directory: config.txt (resolved RunConfig) plus one tensor file
// per parameter, named <parameter name>.mht.
void save_checkpoint(const std::string& dir, const Model<float>& model, const RunConfig& cfg);

struct LoadedCheckpoint {
    RunConfig config;
    Model<float> model;
};

LoadedCheckpoint load_checkpoint(const std::string& dir);

}  // namespace vse
