#include "ois/simharness/instances.hpp"

namespace ois {

std::vector<EvalInstance> SceneEvalInstances(const Scene& scene, int scene_index,
                                             int min_area,
                                             const std::string& prefix) {
  std::vector<int> picks;
  if (scene.designated_pair) {
    picks = {scene.designated_pair->first, scene.designated_pair->second};
  } else {
    int best = -1;
    std::size_t best_area = 0;
    for (std::size_t i = 0; i < scene.masks.size(); ++i) {
      if (scene.masks[i].Count() > best_area) {
        best_area = scene.masks[i].Count();
        best = static_cast<int>(i);
      }
    }
    if (best >= 0) picks = {best};
  }
  std::vector<EvalInstance> out;
  for (int i : picks) {
    if (static_cast<int>(scene.masks[i].Count()) < min_area) continue;
    out.push_back({prefix + std::to_string(scene_index) + "/" + std::to_string(i),
                   scene.image, scene.depth, scene.masks[i]});
  }
  return out;
}

std::vector<EvalInstance> DatasetEvalInstances(const std::vector<Scene>& scenes,
                                               std::optional<SceneSplit> split,
                                               int min_area) {
  std::vector<EvalInstance> out;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    if (split && scenes[s].split != *split) continue;
    for (EvalInstance& e :
         SceneEvalInstances(scenes[s], static_cast<int>(s), min_area)) {
      out.push_back(std::move(e));
    }
  }
  return out;
}

}  // namespace ois
