#pragma once

#define IONSIM_VERSION "0.1.0"
