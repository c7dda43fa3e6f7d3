#pragma once

#include <string>
#include <string_view>

namespace ugflow {

std::string sha1_hex(std::string_view data);

/// Hash git assigns to a blob with this content ("blob <size>\0" + content).
std::string git_blob_hash(std::string_view content);

}  // namespace ugflow
