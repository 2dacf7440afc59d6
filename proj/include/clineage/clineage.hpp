#pragma once

#include "clineage/address.hpp"
#include "clineage/corpus.hpp"
#include "clineage/detect.hpp"
#include "clineage/diff.hpp"
#include "clineage/embed.hpp"
#include "clineage/error.hpp"
#include "clineage/hash.hpp"
#include "clineage/lineage.hpp"
#include "clineage/model_io.hpp"
#include "clineage/normalize.hpp"
#include "clineage/triage.hpp"
#include "clineage/triage_server.hpp"
#include "clineage/workspace.hpp"
