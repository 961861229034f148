// Regenerates the sample day profiles shipped under scenarios/data/.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "gridloop/profile.hpp"

int main(int argc, char** argv) {
    using namespace gridloop::gateway;
    std::string dir = argc > 1 ? argv[1] : "scenarios/data";
    std::filesystem::create_directories(dir);
    const std::pair<std::string, Profile> files[] = {
        {"pv_day.csv", synthetic_pv_profile()},
        {"building_day.csv", synthetic_building_profile()},
    };
    for (const auto& [name, profile] : files) {
        std::string path = dir + "/" + name;
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) {
            std::fprintf(stderr, "cannot write %s\n", path.c_str());
            return 1;
        }
        f << to_csv(profile);
        std::printf("wrote %s (%zu samples)\n", path.c_str(), profile.samples.size());
    }
    return 0;
}
