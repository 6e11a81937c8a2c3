# Package marker for reliable imports
