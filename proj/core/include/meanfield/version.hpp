#pragma once

#define MEANFIELD_VERSION_STRING "0.1.0"
