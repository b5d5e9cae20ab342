"""ribcage_seg 测试"""
