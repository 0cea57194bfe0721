#pragma once

#include <optional>
#include <vector>

#include "ois/scenegen/scene.hpp"
#include "ois/simharness/protocol.hpp"

namespace ois {

// Evaluation targets of a scene: both designated-pair members when the scene
// has a pair, otherwise its largest instance. Instances below `min_area`
// pixels are skipped. Ids are "<prefix><scene>/<instance>".
std::vector<EvalInstance> SceneEvalInstances(const Scene& scene, int scene_index,
                                             int min_area = 16,
                                             const std::string& prefix = "");

// Concatenated targets of every scene, optionally restricted to one split.
std::vector<EvalInstance> DatasetEvalInstances(
    const std::vector<Scene>& scenes, std::optional<SceneSplit> split = {},
    int min_area = 16);

}  // namespace ois
