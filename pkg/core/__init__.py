# Core module