#pragma once

// Core engine. service.hpp is separate because it pulls in httplib.
#include "diagnosis.hpp"
#include "error.hpp"
#include "expression.hpp"
#include "focusing.hpp"
#include "json_io.hpp"
#include "member.hpp"
#include "model.hpp"
#include "probing.hpp"
#include "propagation.hpp"
#include "session.hpp"
#include "simulator.hpp"
#include "value.hpp"
